use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::assembly::{
    assemble_boundary_operator, assemble_laplace_beltrami, assemble_mass, AssemblyOptions, DenseOperator,
    OperatorKind, P1Space,
};
use crate::linalg::{self, Action, CsrMatrix};
use crate::model::Scene;
use crate::{Error, Result, C64};

/// A dense operator instance named by domain and interfaces.
///
/// `domain` 0 is the exterior, `m + 1` the interior of object `m`; `test` and
/// `trial` are zero-based interface indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OperatorKey {
    pub domain: usize,
    pub test: usize,
    pub trial: usize,
    pub kind: OperatorKind,
}

/// Mass, its inverse and the Laplace–Beltrami matrix of one space.
pub struct LocalOperators {
    pub space: P1Space,
    pub mass: Arc<CsrMatrix>,
    pub mass_inverse: Action,
    pub laplace_beltrami: Arc<CsrMatrix>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    test: usize,
    trial: usize,
    k: (u64, u64),
    kind: OperatorKind,
}

/// Assembled operators keyed on (mesh identity, wavenumber, kind), shared by
/// every formulation built against it.
pub struct OperatorCache {
    options: AssemblyOptions,
    frozen: bool,
    // entries keep their spaces alive so mesh addresses are never reused
    dense: Mutex<HashMap<CacheKey, DenseOperator>>,
    local: Mutex<HashMap<usize, Arc<LocalOperators>>>,
    assemblies: Mutex<(usize, f64)>,
}

impl Default for OperatorCache {
    fn default() -> Self {
        Self::new(AssemblyOptions::default())
    }
}

impl OperatorCache {
    pub fn new(options: AssemblyOptions) -> Self {
        OperatorCache {
            options,
            frozen: false,
            dense: Mutex::new(HashMap::new()),
            local: Mutex::new(HashMap::new()),
            assemblies: Mutex::new((0, 0.0)),
        }
    }

    /// Stops assembling on demand: lookups of absent operators fail.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn options(&self) -> &AssemblyOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.dense.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of dense assemblies performed and their total wall time.
    pub fn assembly_stats(&self) -> (usize, f64) {
        *self.assemblies.lock().unwrap()
    }

    fn key(kind: OperatorKind, k: C64, test: &P1Space, trial: &P1Space) -> CacheKey {
        CacheKey {
            test: Arc::as_ptr(&test.mesh) as usize,
            trial: Arc::as_ptr(&trial.mesh) as usize,
            k: (k.re.to_bits(), k.im.to_bits()),
            kind,
        }
    }

    pub fn contains(&self, kind: OperatorKind, k: C64, test: &P1Space, trial: &P1Space) -> bool {
        self.dense.lock().unwrap().contains_key(&Self::key(kind, k, test, trial))
    }

    /// Returns the operator, assembling it first unless the cache is frozen.
    pub fn dense(&self, kind: OperatorKind, k: C64, test: &P1Space, trial: &P1Space) -> Result<DenseOperator> {
        let key = Self::key(kind, k, test, trial);
        if let Some(op) = self.dense.lock().unwrap().get(&key) {
            return Ok(op.clone());
        }
        let op = if kind == OperatorKind::T && self.options.adjoint_by_transpose {
            DenseOperator::adjoint_of(&self.dense(OperatorKind::K, k, trial, test)?)
        } else if self.frozen {
            return Err(Error::MissingOperator { kind: kind.to_string(), row: key.test, col: key.trial });
        } else {
            assemble_boundary_operator(kind, k, test, trial, &self.options)?
        };
        {
            let mut s = self.assemblies.lock().unwrap();
            s.0 += 1;
            s.1 += op.assembly_seconds;
        }
        self.dense.lock().unwrap().insert(key, op.clone());
        Ok(op)
    }

    pub fn local(&self, space: &P1Space) -> Result<Arc<LocalOperators>> {
        let key = Arc::as_ptr(&space.mesh) as usize;
        if let Some(l) = self.local.lock().unwrap().get(&key) {
            return Ok(l.clone());
        }
        let mass = assemble_mass(space).matrix;
        let mass_inverse = linalg::mass_inverse(&mass)?;
        let l = Arc::new(LocalOperators {
            space: space.clone(),
            mass,
            mass_inverse,
            laplace_beltrami: assemble_laplace_beltrami(space).matrix,
        });
        self.local.lock().unwrap().insert(key, l.clone());
        Ok(l)
    }
}

/// A scene bound to a cache, handing out operator blocks by scene indices and
/// remembering which ones were used.
pub struct Context<'a> {
    pub scene: &'a Scene,
    pub cache: &'a OperatorCache,
    pub spaces: Vec<P1Space>,
    pub locals: Vec<Arc<LocalOperators>>,
    used: Mutex<BTreeSet<OperatorKey>>,
}

impl<'a> Context<'a> {
    pub fn new(scene: &'a Scene, cache: &'a OperatorCache) -> Result<Self> {
        let spaces: Vec<P1Space> = scene.objects.iter().map(|o| P1Space::new(o.mesh.clone())).collect();
        let locals = spaces.iter().map(|s| cache.local(s)).collect::<Result<Vec<_>>>()?;
        Ok(Context { scene, cache, spaces, locals, used: Mutex::new(BTreeSet::new()) })
    }

    pub fn count(&self) -> usize {
        self.spaces.len()
    }

    pub fn dofs(&self, m: usize) -> usize {
        self.spaces[m].dof_count()
    }

    /// Wavenumber of `domain` (0 exterior).
    pub fn k(&self, domain: usize) -> C64 {
        self.scene.domain_wavenumber(domain).k
    }

    /// sigma_m / sigma_0 for object `m`.
    pub fn sigma(&self, m: usize) -> f64 {
        self.scene.sigma_ratio(m)
    }

    /// Galerkin matrix of `kind` for `domain`, tested on `test`, acting on `trial`.
    pub fn operator(&self, domain: usize, kind: OperatorKind, test: usize, trial: usize) -> Result<DenseOperator> {
        let op = self
            .cache
            .dense(kind, self.k(domain), &self.spaces[test], &self.spaces[trial])
            .map_err(|e| match e {
                Error::MissingOperator { kind, .. } => Error::MissingOperator { kind, row: test, col: trial },
                e => e,
            })?;
        self.used.lock().unwrap().insert(OperatorKey { domain, test, trial, kind });
        Ok(op)
    }

    /// Block of `kind` in `domain` as an action.
    pub fn operator_action(&self, domain: usize, kind: OperatorKind, test: usize, trial: usize) -> Result<Action> {
        Ok(linalg::dense(self.operator(domain, kind, test, trial)?.matrix))
    }

    /// Exterior block `kind_{0,mn}`.
    pub fn ext(&self, kind: OperatorKind, m: usize, n: usize) -> Result<Action> {
        Ok(linalg::dense(self.operator(0, kind, m, n)?.matrix))
    }

    /// Interior block `kind_m` on object `m`.
    pub fn int(&self, kind: OperatorKind, m: usize) -> Result<Action> {
        Ok(linalg::dense(self.operator(m + 1, kind, m, m)?.matrix))
    }

    pub fn mass(&self, m: usize) -> Action {
        linalg::sparse(self.locals[m].mass.clone())
    }

    pub fn mass_inverse(&self, m: usize) -> Action {
        self.locals[m].mass_inverse.clone()
    }

    /// Operator keys looked up so far.
    pub fn used(&self) -> BTreeSet<OperatorKey> {
        self.used.lock().unwrap().clone()
    }

    pub fn clear_used(&self) {
        self.used.lock().unwrap().clear();
    }
}

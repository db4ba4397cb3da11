// SPDX-License-Identifier: MIT OR Apache-2.0

//! Critical values and individual levels.
//!
//! - [`laws`]: exact Poisson and binomial laws and the exact null laws of single-window
//!   statistics.
//! - [`montecarlo`]: Monte Carlo null laws of scan functionals.
//! - [`levels`]: Bonferroni and min-p levels of window families.
//! - [`bounds`]: closed-form quantile bounds.
//! - [`store`]: the persistent critical-value store.
//!
//! [`Calibrator`] ties these together with in-memory caches and the store.

pub mod bounds;
pub mod laws;
pub mod levels;
pub mod montecarlo;
pub mod store;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

pub use bounds::{bound_check, BoundCheck};
pub use laws::{binomial_quantile, poisson_quantile, DiscreteLaw, RandomizedQuantile};
pub use levels::{bonferroni, Correction, FamilyLaws, GridStat, GridWindow, LevelCorrection};
pub use montecarlo::{mc_quantile, Functional, McQuantile, QuantileQuery, Regime};
pub use store::{CriticalValueStore, StoreKey};

use crate::error::{Error, Result};

/// Default replicate count of calibration pools.
pub const DEFAULT_REPLICATES: usize = 200_000;
/// Default cap on `n·B` for conditional pools.
pub const DEFAULT_BUDGET: u64 = 100_000_000_000;

/// Number of sorted pools kept in memory.
const POOL_CACHE_CAPACITY: usize = 32;

/// Calibration settings.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationOptions {
    /// Replicate count `B` of Monte Carlo pools.
    pub replicates: usize,
    /// Seed of the calibration substreams.
    pub seed: u64,
    /// Compute missing values instead of failing with [`Error::CalibrationRequired`].
    pub autocalibrate: bool,
    /// Cap on `n·B` for conditional pools.
    pub budget: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { replicates: DEFAULT_REPLICATES, seed: 1, autocalibrate: true, budget: DEFAULT_BUDGET }
    }
}

type LawKey = (GridStat, u64, u64);

/// Per-replicate `(min, max)` window counts.
type ExtremePool = Vec<(usize, usize)>;

/// Calibration front end: exact laws, Monte Carlo quantiles and min-p levels, cached in
/// memory and persisted in a [`CriticalValueStore`].
///
/// Caches are filled without holding locks during computation, so concurrent callers may
/// duplicate work on a miss but always obtain identical values.
#[derive(Debug)]
pub struct Calibrator {
    options: CalibrationOptions,
    store: Arc<CriticalValueStore>,
    laws: Mutex<HashMap<LawKey, Arc<DiscreteLaw>>>,
    pools: Mutex<HashMap<String, Arc<Vec<f64>>>>,
    extremes: Mutex<HashMap<String, Arc<ExtremePool>>>,
    warnings: Mutex<Vec<String>>,
}

impl Calibrator {
    pub fn new(options: CalibrationOptions, store: Arc<CriticalValueStore>) -> Self {
        Self {
            options,
            store,
            laws: Mutex::default(),
            pools: Mutex::default(),
            extremes: Mutex::default(),
            warnings: Mutex::default(),
        }
    }

    /// Calibrator sharing this store but using another replicate count and seed.
    pub fn derive(&self, replicates: usize, seed: u64) -> Self {
        Self::new(CalibrationOptions { replicates, seed, ..self.options.clone() }, self.store.clone())
    }

    /// Calibrator backed by an in-memory store.
    pub fn in_memory(options: CalibrationOptions) -> Self {
        Self::new(options, Arc::new(CriticalValueStore::in_memory()))
    }

    pub fn options(&self) -> &CalibrationOptions {
        &self.options
    }

    pub fn store(&self) -> &Arc<CriticalValueStore> {
        &self.store
    }

    /// Warnings raised so far (deduplicated).
    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().expect("warnings lock").clone()
    }

    fn warn(&self, message: Option<String>) {
        if let Some(m) = message {
            let mut w = self.warnings.lock().expect("warnings lock");
            if !w.contains(&m) {
                w.push(m);
            }
        }
    }

    fn regime_bits(regime: &Regime) -> u64 {
        regime.stream_key()
    }

    /// Exact null law of a family statistic on a window of length `ρ`.
    pub fn law(&self, stat: GridStat, regime: &Regime, rho: f64) -> Result<Arc<DiscreteLaw>> {
        let key = (stat, Self::regime_bits(regime), rho.to_bits());
        if let Some(law) = self.laws.lock().expect("law cache").get(&key) {
            return Ok(law.clone());
        }
        let law = Arc::new(levels::window_law(stat, regime, rho)?);
        self.laws.lock().expect("law cache").insert(key, law.clone());
        Ok(law)
    }

    /// Drops cached laws and pools to release memory.
    pub fn clear_caches(&self) {
        self.laws.lock().expect("law cache").clear();
        self.pools.lock().expect("pool cache").clear();
        self.extremes.lock().expect("pool cache").clear();
    }

    /// Exact laws of a window family.
    pub fn family(&self, stat: GridStat, regime: Regime, windows: Vec<GridWindow>) -> Result<FamilyLaws> {
        FamilyLaws::new(stat, regime, windows, |s, r, rho| self.law(s, r, rho))
    }

    fn key(&self, family: &str, window: String, regime: &Regime, u: f64) -> StoreKey {
        StoreKey {
            family: family.into(),
            window,
            regime: regime.descriptor(),
            n: regime.n().map(|n| n as u64),
            u,
            b: self.options.replicates as u64,
            seed: self.options.seed,
        }
    }

    /// Looks `key` up in the store, computing and storing it on a miss when allowed.
    pub fn cached_value(&self, key: StoreKey, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(v) = self.store.get(&key) {
            return Ok(v);
        }
        if !self.options.autocalibrate {
            return Err(Error::CalibrationRequired(format!(
                "{} on {} under {}{} at u = {} (B = {}, seed = {})",
                key.family,
                key.window,
                key.regime,
                key.n.map(|n| format!(" given n = {n}")).unwrap_or_default(),
                key.u,
                key.b,
                key.seed
            )));
        }
        let value = compute()?;
        self.store.insert(key, value);
        Ok(value)
    }

    /// Ascending Monte Carlo pool of a functional under `regime`.
    pub fn pool(&self, functional: &Functional, regime: &Regime) -> Result<Arc<Vec<f64>>> {
        let id = format!("{}|{}|{:?}", functional.descriptor(), regime.descriptor(), regime.n());
        if let Some(p) = self.pools.lock().expect("pool cache").get(&id) {
            return Ok(p.clone());
        }
        montecarlo::check_budget(regime, self.options.replicates, self.options.budget)?;
        self.warn(montecarlo::pool_warning(self.options.replicates));
        let pool = Arc::new(montecarlo::simulate_pool(functional, regime, self.options.replicates, self.options.seed)?);
        let mut cache = self.pools.lock().expect("pool cache");
        if cache.len() >= POOL_CACHE_CAPACITY {
            cache.clear();
        }
        cache.insert(id, pool.clone());
        Ok(pool)
    }

    /// Calibrated `u`-quantile of a functional under `regime`.
    pub fn quantile(&self, functional: &Functional, regime: &Regime, u: f64) -> Result<f64> {
        QuantileQuery { functional: *functional, regime: *regime, u, replicates: self.options.replicates, seed: self.options.seed }
            .validate()?;
        let key = self.key(functional.name(), functional.descriptor(), regime, u);
        self.cached_value(key, || Ok(montecarlo::empirical_quantile(&self.pool(functional, regime)?, u)))
    }

    /// Per-replicate `(min, max)` counts of windows of length `ℓ`.
    pub fn extremes_pool(&self, ell: f64, regime: &Regime) -> Result<Arc<ExtremePool>> {
        let id = format!("{ell:?}|{}|{:?}", regime.descriptor(), regime.n());
        if let Some(p) = self.extremes.lock().expect("pool cache").get(&id) {
            return Ok(p.clone());
        }
        montecarlo::check_budget(regime, self.options.replicates, self.options.budget)?;
        self.warn(montecarlo::pool_warning(self.options.replicates));
        let pool =
            Arc::new(montecarlo::simulate_extremes_pool(ell, regime, self.options.replicates, self.options.seed)?);
        let mut cache = self.extremes.lock().expect("pool cache");
        if cache.len() >= POOL_CACHE_CAPACITY {
            cache.clear();
        }
        cache.insert(id, pool.clone());
        Ok(pool)
    }

    /// Min-p level of a window family at family-wise level `α`, floored at its Bonferroni
    /// level.
    pub fn minp_level(&self, family: &FamilyLaws, alpha: f64, label: &str) -> Result<f64> {
        let bonf = bonferroni(alpha, family.len())?;
        let key = self.key("minp", format!("{label}#{:016x}", family.key()), &family.regime, alpha);
        self.cached_value(key, || {
            montecarlo::check_budget(&family.regime, self.options.replicates, self.options.budget)?;
            self.warn(montecarlo::pool_warning(self.options.replicates));
            let pool = family.minp_pool(self.options.replicates, self.options.seed)?;
            levels::minp_level_from_pool(&pool, alpha, bonf)
        })
    }

    /// Store key for a level computed outside this type, such as a scan-pair min-p level.
    pub fn level_key(&self, family: &str, window: String, regime: &Regime, alpha: f64) -> StoreKey {
        self.key(family, window, regime, alpha)
    }

    /// Persists the store.
    pub fn save(&self) -> Result<()> {
        self.store.save()
    }
}

//! Linearly parameterized dynamics learning: per-component least squares,
//! the gram-matrix eigen-split backing the reachable-model interval, online
//! scale estimation, and the continuous-state agent built on them.

use crate::linalg::{self, jacobi_eigh, LinalgError, SymEig};
use crate::planner::{greedy_action, FittedPlanner, PlanModel, PlannerError};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("feature vector has length {got}, component expects {expected}")]
    FeatureShape { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Known basis functions, one block per predicted state component.
pub trait FeatureMap: Send + Sync {
    fn num_components(&self) -> usize;
    fn dim(&self, component: usize) -> usize;
    fn eval(&self, component: usize, state: &[f64], action: usize, out: &mut Vec<f64>);
}

/// Eigen-split of a gram matrix at the unit-eigenvalue boundary.
///
/// `z` is the spectral pseudo-inverse, `g` inverts only the block with
/// eigenvalues at least 1, and `w` projects onto the complementary
/// eigenspace (small eigenvalues and the null space).
#[derive(Debug, Clone)]
pub struct EigSplit {
    pub dim: usize,
    /// Descending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Row-major orthonormal eigenvectors, column `k` for `eigenvalues[k]`.
    pub eigenvectors: Vec<f64>,
    /// Number of eigenvalues `>= 1`.
    pub split_index: usize,
    /// Eigenvalues at or below this are treated as zero by the
    /// pseudo-inverse (`1e-10` relative to the largest).
    pub pinv_threshold: f64,
}

impl EigSplit {
    fn eig(&self) -> SymEig {
        SymEig {
            dim: self.dim,
            values: self.eigenvalues.clone(),
            vectors: self.eigenvectors.clone(),
        }
    }

    pub fn z_matrix(&self) -> Vec<f64> {
        let diag: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&l| if l > self.pinv_threshold { 1.0 / l } else { 0.0 })
            .collect();
        self.eig().recompose(&diag)
    }

    pub fn g_matrix(&self) -> Vec<f64> {
        let diag: Vec<f64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &l)| if k < self.split_index { 1.0 / l } else { 0.0 })
            .collect();
        self.eig().recompose(&diag)
    }

    pub fn w_matrix(&self) -> Vec<f64> {
        let diag: Vec<f64> = (0..self.dim)
            .map(|k| if k < self.split_index { 0.0 } else { 1.0 })
            .collect();
        self.eig().recompose(&diag)
    }

    /// `|phi^T g phi| + ||phi^T z|| * ||w phi||`, the direction-dependent
    /// factor of the reachable-model interval, plus the share of `phi` in
    /// directions the pseudo-inverse zeroed out.
    ///
    /// The closed form assumes an invertible gram; under a pseudo-inverse a
    /// direction with no data would otherwise get a zero interval even
    /// though one future sample moves the fit along it by the full residual
    /// scale (the same rank-one update identity behind the in-span terms
    /// gives `phi^T (phi phi^T)^+ phi = 1` there).
    pub fn interval_terms(&self, phi: &[f64]) -> f64 {
        let n = self.dim;
        let mut g_quad = 0.0;
        let mut z_sq = 0.0;
        let mut w_sq = 0.0;
        let mut null_sq = 0.0;
        let mut phi_sq = 0.0;
        for k in 0..n {
            let mut c = 0.0;
            for i in 0..n {
                c += self.eigenvectors[i * n + k] * phi[i];
            }
            let l = self.eigenvalues[k];
            phi_sq += c * c;
            if k < self.split_index {
                g_quad += c * c / l;
            } else {
                w_sq += c * c;
            }
            if l > self.pinv_threshold {
                z_sq += (c / l) * (c / l);
            } else {
                null_sq += c * c;
            }
        }
        let null_term = if phi_sq > 0.0 { null_sq / phi_sq } else { 0.0 };
        g_quad.abs() + z_sq.sqrt() * w_sq.sqrt() + null_term
    }

    /// Pseudo-inverse solve `theta = z * rhs`.
    pub fn pinv_apply(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut coeff = vec![0.0; n];
        for (k, slot) in coeff.iter_mut().enumerate() {
            let l = self.eigenvalues[k];
            if l > self.pinv_threshold {
                let mut c = 0.0;
                for i in 0..n {
                    c += self.eigenvectors[i * n + k] * rhs[i];
                }
                *slot = c / l;
            }
        }
        let mut out = vec![0.0; n];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..n {
                acc += self.eigenvectors[i * n + k] * coeff[k];
            }
            *slot = acc;
        }
        out
    }
}

/// Spectral decomposition of a symmetric PSD gram matrix, partitioned at
/// eigenvalue 1.
pub fn eig_split(gram: &[f64], dim: usize) -> Result<EigSplit, LinearError> {
    let eig = jacobi_eigh(gram, dim)?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let pinv_threshold = 1e-10 * lambda_max;
    let split_index = eig.values.iter().take_while(|&&l| l >= 1.0).count();
    Ok(EigSplit {
        dim,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        split_index,
        pinv_threshold,
    })
}

/// Least-squares state for one predicted component: accumulated normal
/// equations, the current fit, and the error statistics behind the
/// model-error bound.
#[derive(Debug, Clone)]
pub struct ComponentModel {
    pub dim: usize,
    pub gram: Vec<f64>,
    pub xty: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma: f64,
    pub data_count: u64,
    split: EigSplit,
    residual_sum: f64,
    residual_count: u64,
    fixed_delta: Option<f64>,
    dirty: bool,
    pinv_rel_cutoff: f64,
}

impl ComponentModel {
    pub fn new(dim: usize, sigma: f64, fixed_delta: Option<f64>) -> Result<Self, LinearError> {
        if dim == 0 {
            return Err(LinearError::BadParameter("component dimension must be positive".into()));
        }
        let split = eig_split(&vec![0.0; dim * dim], dim)?;
        Ok(Self {
            dim,
            gram: vec![0.0; dim * dim],
            xty: vec![0.0; dim],
            theta: vec![0.0; dim],
            sigma,
            data_count: 0,
            split,
            residual_sum: 0.0,
            residual_count: 0,
            fixed_delta,
            dirty: false,
            pinv_rel_cutoff: 1e-10,
        })
    }

    /// Raises the relative eigenvalue cutoff of the pseudo-inverse.
    /// Directions below it carry almost no data; zeroing them keeps the fit
    /// from flapping with noise amplified by 1/lambda, and the interval
    /// treats them as unknown.
    pub fn with_pinv_cutoff(mut self, rel_cutoff: f64) -> Self {
        self.pinv_rel_cutoff = rel_cutoff;
        self
    }

    /// Accumulates one `(features, target)` pair into the normal equations
    /// without refitting.
    pub fn ingest(&mut self, phi: &[f64], y: f64) -> Result<(), LinearError> {
        let n = self.dim;
        if phi.len() != n {
            return Err(LinearError::FeatureShape { expected: n, got: phi.len() });
        }
        for i in 0..n {
            for j in 0..n {
                self.gram[i * n + j] += phi[i] * phi[j];
            }
            self.xty[i] += phi[i] * y;
        }
        self.data_count += 1;
        self.dirty = true;
        Ok(())
    }

    /// Recomputes the eigen-split and the pseudo-inverse fit if data
    /// arrived since the last fit.
    pub fn refresh_fit(&mut self) -> Result<(), LinearError> {
        if !self.dirty {
            return Ok(());
        }
        let mut split = eig_split(&self.gram, self.dim)?;
        if self.pinv_rel_cutoff > 1e-10 {
            let lambda_max = split.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
            split.pinv_threshold = self.pinv_rel_cutoff * lambda_max;
        }
        self.theta = split.pinv_apply(&self.xty);
        self.split = split;
        self.dirty = false;
        Ok(())
    }

    pub fn split(&self) -> &EigSplit {
        &self.split
    }

    pub fn predict(&self, phi: &[f64]) -> f64 {
        linalg::dot(&self.theta, phi)
    }

    /// Model-error bound: the configured constant when provided, otherwise
    /// the running mean of absolute prediction residuals.
    pub fn delta_bound(&self) -> f64 {
        match self.fixed_delta {
            Some(d) => d,
            None if self.residual_count > 0 => self.residual_sum / self.residual_count as f64,
            None => 0.0,
        }
    }

    pub fn record_residual(&mut self, r: f64) {
        self.residual_sum += r.abs();
        self.residual_count += 1;
    }
}

/// Accumulates a batch of `(features, observed component)` pairs and refits
/// by spectral pseudo-inverse (eigenvalues below `1e-10` of the largest are
/// dropped, so rank-deficient grams stay well-defined).
pub fn fit_least_squares(
    model: &mut ComponentModel,
    batch: &[(Vec<f64>, f64)],
) -> Result<(), LinearError> {
    for (phi, y) in batch {
        model.ingest(phi, *y)?;
    }
    model.dirty = true;
    model.refresh_fit()
}

/// Optimism margin `sqrt(2 ln(pi^2 M^2 n_s h / (6 delta)))`, clamped at
/// zero when the log argument drops below one.
pub fn varsigma(m_calls: u64, num_components: usize, h: u64, delta: f64) -> f64 {
    let arg = std::f64::consts::PI.powi(2) * (m_calls as f64).powi(2) * num_components as f64
        * h as f64
        / (6.0 * delta);
    if arg < 1.0 {
        0.0
    } else {
        (2.0 * arg.ln()).sqrt()
    }
}

/// Reachable-model interval for one component:
/// `h (delta + varsigma sigma) (|phi^T g phi| + ||phi^T z|| ||w phi||)`.
pub fn interval_ih(
    phi: &[f64],
    split: &EigSplit,
    h: u64,
    delta_bound: f64,
    sigma: f64,
    varsigma_val: f64,
) -> f64 {
    if h == 0 {
        return 0.0;
    }
    h as f64 * (delta_bound + varsigma_val * sigma) * split.interval_terms(phi)
}

/// Reward bonus `r + L ||intervals||`.
pub fn bonus_reward(r: f64, intervals: &[f64], lipschitz: f64) -> f64 {
    r + lipschitz * linalg::norm2(intervals)
}

/// Largest value-difference ratio over all state pairs; pairs closer than
/// `1e-9` are skipped, and fewer than two usable states fall back to the
/// prior.
pub fn estimate_lipschitz(points: &[(Vec<f64>, f64)], prior: f64) -> f64 {
    let mut best: Option<f64> = None;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dist = points[i]
                .0
                .iter()
                .zip(&points[j].0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist < 1e-9 {
                continue;
            }
            let ratio = (points[i].1 - points[j].1).abs() / dist;
            best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
        }
    }
    best.unwrap_or(prior)
}

/// Running mean of absolute residuals; zero on an empty series (the
/// configured bound bypasses estimation at the model level).
pub fn estimate_delta(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        0.0
    } else {
        residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64
    }
}

/// All per-component models plus the shared interval call counter `M`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub components: Vec<ComponentModel>,
    pub m_calls: u64,
}

impl LinearModel {
    pub fn new(components: Vec<ComponentModel>) -> Self {
        Self { components, m_calls: 1 }
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }
}

/// Environment-specific knowledge the continuous agent plans with: state
/// clamping, the known reward, and the terminal predicate.
pub trait ContinuousTask: Send + Sync {
    fn state_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn clamp_state(&self, state: &mut [f64]);
    fn reward(&self, state: &[f64], action: usize, next: &[f64]) -> f64;
    fn is_terminal(&self, state: &[f64]) -> bool;
    fn max_reward(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearExplorationMode {
    /// Reward bonus `L ||I_h||` from the reachable-model interval.
    PacRmdp { h: u64 },
    /// Treat pairs whose interval exceeds `eps` as unknown and substitute
    /// the maximum reward (explore-until-known baseline).
    PacMdp { eps: f64 },
}

#[derive(Debug, Clone)]
pub struct LinearAgentConfig {
    pub mode: LinearExplorationMode,
    /// Confidence parameter entering the optimism margin.
    pub delta: f64,
    /// Known per-component noise standard deviation.
    pub sigma: f64,
    /// Fixed model-error bound; `None` estimates it from residuals.
    pub fixed_delta_bound: Option<f64>,
    /// Fixed continuity constant; `None` estimates it from the planning
    /// grid after each refresh.
    pub fixed_lipschitz: Option<f64>,
    /// Continuity constant used before any estimate exists.
    pub prior_lipschitz: f64,
    /// Uniform-random action probability layered on top of the planner.
    pub eps_random: f64,
    pub gamma: f64,
    pub plan_tol: f64,
    pub plan_sweeps: usize,
    /// Skip replanning while every fitted parameter moved less than this
    /// since the last plan (0 replans on any change).
    pub plan_refresh_tol: f64,
    /// Re-estimate the continuity constant every this many replans.
    pub lipschitz_refresh_every: u64,
    /// Recompute the eigendecomposition fit every this many observations
    /// (1 refits on every step; the normal equations accumulate either way).
    pub refit_every: u64,
    /// Relative eigenvalue cutoff for the model's pseudo-inverse.
    pub pinv_rel_cutoff: f64,
}

impl Default for LinearAgentConfig {
    fn default() -> Self {
        Self {
            mode: LinearExplorationMode::PacRmdp { h: 10 },
            delta: 0.9,
            sigma: 0.001,
            fixed_delta_bound: None,
            fixed_lipschitz: None,
            prior_lipschitz: 10.0,
            eps_random: 0.0,
            gamma: 0.99,
            plan_tol: 0.01,
            plan_sweeps: 60,
            plan_refresh_tol: 0.0,
            lipschitz_refresh_every: 10,
            refit_every: 1,
            pinv_rel_cutoff: 1e-10,
        }
    }
}

impl LinearAgentConfig {
    pub fn validate(&self) -> Result<(), LinearError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(LinearError::BadParameter(format!("gamma must be in [0,1), got {}", self.gamma)));
        }
        if self.delta <= 0.0 || self.delta >= 1.0 {
            return Err(LinearError::BadParameter(format!(
                "delta must be in (0,1), got {}",
                self.delta
            )));
        }
        if self.plan_tol <= 0.0 {
            return Err(LinearError::BadParameter("plan_tol must be positive".into()));
        }
        if self.plan_sweeps == 0 {
            return Err(LinearError::BadParameter("plan_sweeps must be positive".into()));
        }
        if self.refit_every == 0 {
            return Err(LinearError::BadParameter("refit_every must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.pinv_rel_cutoff) || self.pinv_rel_cutoff <= 0.0 {
            return Err(LinearError::BadParameter("pinv_rel_cutoff must be in (0,1)".into()));
        }
        if !(0.0..=1.0).contains(&self.eps_random) {
            return Err(LinearError::BadParameter("eps_random must be in [0,1]".into()));
        }
        if let LinearExplorationMode::PacMdp { eps } = self.mode {
            if eps <= 0.0 {
                return Err(LinearError::BadParameter("pac-mdp eps must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Certainty-equivalent view of the learned model with bonused rewards,
/// handed to the planner. The interval call counter advances once per
/// planning sweep and the optimism margin is refreshed with it.
struct BonusedModel<'a, T: ContinuousTask, F: FeatureMap> {
    task: &'a T,
    features: &'a F,
    components: &'a [ComponentModel],
    m_calls: &'a mut u64,
    mode: LinearExplorationMode,
    delta: f64,
    lipschitz: f64,
    varsigma_val: f64,
    phi: Vec<f64>,
    intervals: Vec<f64>,
}

impl<'a, T: ContinuousTask, F: FeatureMap> BonusedModel<'a, T, F> {
    fn new(
        task: &'a T,
        features: &'a F,
        components: &'a [ComponentModel],
        m_calls: &'a mut u64,
        mode: LinearExplorationMode,
        delta: f64,
        lipschitz: f64,
    ) -> Self {
        let n_s = components.len();
        let h = match mode {
            LinearExplorationMode::PacRmdp { h } => h,
            LinearExplorationMode::PacMdp { .. } => 1,
        };
        let varsigma_val = varsigma(*m_calls, n_s, h, delta);
        Self {
            task,
            features,
            components,
            m_calls,
            mode,
            delta,
            lipschitz,
            varsigma_val,
            phi: Vec::new(),
            intervals: vec![0.0; n_s],
        }
    }
}

impl<T: ContinuousTask, F: FeatureMap> PlanModel for BonusedModel<'_, T, F> {
    fn num_actions(&self) -> usize {
        self.task.num_actions()
    }

    fn begin_sweep(&mut self) {
        *self.m_calls += 1;
        let n_s = self.components.len();
        let h = match self.mode {
            LinearExplorationMode::PacRmdp { h } => h,
            LinearExplorationMode::PacMdp { .. } => 1,
        };
        self.varsigma_val = varsigma(*self.m_calls, n_s, h, self.delta);
    }

    fn step(&mut self, state: &[f64], action: usize, next: &mut Vec<f64>) -> (f64, bool) {
        next.clear();
        let h = match self.mode {
            LinearExplorationMode::PacRmdp { h } => h,
            LinearExplorationMode::PacMdp { .. } => 1,
        };
        for (i, comp) in self.components.iter().enumerate() {
            self.features.eval(i, state, action, &mut self.phi);
            next.push(comp.predict(&self.phi));
            self.intervals[i] = interval_ih(
                &self.phi,
                &comp.split,
                h,
                comp.delta_bound(),
                comp.sigma,
                self.varsigma_val,
            );
        }
        self.task.clamp_state(next);
        let r = self.task.reward(state, action, next);
        let terminal = self.task.is_terminal(next);
        let r_tilde = match self.mode {
            // optimism past the best achievable reward is vacuous, and the
            // cap breaks the feedback loop between the bonus scale and the
            // continuity constant estimated from the planned values
            LinearExplorationMode::PacRmdp { .. } => {
                bonus_reward(r, &self.intervals, self.lipschitz).min(self.task.max_reward().max(r))
            }
            LinearExplorationMode::PacMdp { eps } => {
                if linalg::norm2(&self.intervals) <= eps {
                    r
                } else {
                    self.task.max_reward()
                }
            }
        };
        (r_tilde, terminal)
    }
}

/// Continuous-state agent: least-squares model, interval-driven optimism,
/// fitted-value-iteration planning, online `L` and model-error estimation.
pub struct LinearAgent<T: ContinuousTask, F: FeatureMap> {
    task: T,
    features: F,
    config: LinearAgentConfig,
    pub model: LinearModel,
    planner: FittedPlanner,
    lipschitz: f64,
    theta_at_plan: Option<Vec<Vec<f64>>>,
    plans: u64,
    since_refit: u64,
}

impl<T: ContinuousTask, F: FeatureMap> LinearAgent<T, F> {
    pub fn new(
        task: T,
        features: F,
        config: LinearAgentConfig,
        planner: FittedPlanner,
    ) -> Result<Self, LinearError> {
        config.validate()?;
        let mut components = Vec::with_capacity(features.num_components());
        for i in 0..features.num_components() {
            components.push(
                ComponentModel::new(features.dim(i), config.sigma, config.fixed_delta_bound)?
                    .with_pinv_cutoff(config.pinv_rel_cutoff),
            );
        }
        let lipschitz = config.fixed_lipschitz.unwrap_or(config.prior_lipschitz);
        Ok(Self {
            task,
            features,
            config,
            model: LinearModel::new(components),
            planner,
            lipschitz,
            theta_at_plan: None,
            plans: 0,
            since_refit: 0,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn plans(&self) -> u64 {
        self.plans
    }

    pub fn value_at(&self, state: &[f64]) -> f64 {
        self.planner.grid.eval(state)
    }

    fn theta_drift(&self) -> f64 {
        match &self.theta_at_plan {
            None => f64::INFINITY,
            Some(snapshot) => self
                .model
                .components
                .iter()
                .zip(snapshot)
                .map(|(c, t)| {
                    c.theta
                        .iter()
                        .zip(t)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max),
        }
    }

    fn replan_if_stale(&mut self) -> Result<(), LinearError> {
        if self.theta_drift() <= self.config.plan_refresh_tol {
            return Ok(());
        }
        {
            let mut view = BonusedModel::new(
                &self.task,
                &self.features,
                &self.model.components,
                &mut self.model.m_calls,
                self.config.mode,
                self.config.delta,
                self.lipschitz,
            );
            self.planner.plan(&mut view)?;
        }
        self.plans += 1;
        self.theta_at_plan =
            Some(self.model.components.iter().map(|c| c.theta.clone()).collect());
        if self.config.fixed_lipschitz.is_none()
            && (self.plans == 1 || self.plans % self.config.lipschitz_refresh_every == 0)
        {
            // states visited in the planning phase are the grid centers
            let points: Vec<(Vec<f64>, f64)> = (0..self.planner.grid.num_centers())
                .map(|k| {
                    let c = self.planner.grid.center(k).to_vec();
                    let v = self.planner.grid.eval(&c);
                    (c, v)
                })
                .collect();
            self.lipschitz = estimate_lipschitz(&points, self.config.prior_lipschitz);
        }
        Ok(())
    }

    /// Plans (when the model moved) and returns the greedy action; the
    /// epsilon draw precedes any action draw so the stream layout is
    /// seed-stable.
    pub fn act<R: Rng>(&mut self, state: &[f64], rng: &mut R) -> Result<usize, LinearError> {
        if self.config.eps_random > 0.0 {
            let draw: f64 = rng.gen();
            if draw < self.config.eps_random {
                return Ok(rng.gen_range(0..self.task.num_actions()));
            }
        }
        self.replan_if_stale()?;
        let mut view = BonusedModel::new(
            &self.task,
            &self.features,
            &self.model.components,
            &mut self.model.m_calls,
            self.config.mode,
            self.config.delta,
            self.lipschitz,
        );
        Ok(greedy_action(&self.planner.grid, &mut view, state, self.config.gamma))
    }

    /// Records the observed transition: prediction residuals first (they
    /// feed the model-error bound), then the least-squares update. The
    /// eigendecomposition refit runs on the configured cadence; the normal
    /// equations accumulate every step regardless.
    pub fn observe(
        &mut self,
        state: &[f64],
        action: usize,
        next: &[f64],
    ) -> Result<(), LinearError> {
        let mut phi = Vec::new();
        for i in 0..self.model.components.len() {
            self.features.eval(i, state, action, &mut phi);
            let comp = &mut self.model.components[i];
            let residual = comp.predict(&phi) - next[i];
            comp.record_residual(residual);
            comp.ingest(&phi, next[i])?;
        }
        self.since_refit += 1;
        if self.since_refit >= self.config.refit_every {
            for comp in &mut self.model.components {
                comp.refresh_fit()?;
            }
            self.since_refit = 0;
        }
        Ok(())
    }
}

//! Position sweeps, band tracking and avoided-crossing extraction.
//!
//! Detunings are stored as the fractional change `δ` of `κ = k²` relative to
//! the first mode of the set. Human-facing conversions use `Δω/ω0 = δ/2`,
//! absolute frequency `ω0/2π`, and free spectral ranges of `λ/2L` in units
//! of `ω0`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::beam::{fractional_splitting, CavityGeometry, ModeIndex};
use crate::coupling::{assemble_matrix, outside_near_waist, solve_symmetric, DetuningSolution, Method};
use crate::error::{Error, Result};
use crate::membrane::MembraneConfig;
use crate::roots::golden_minimize;
use crate::single_mode::ReflectivityMap;

/// Band diagram over a position sweep, with band identity assigned by
/// eigenvector-overlap continuity.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub mode_set: Vec<ModeIndex>,
    /// Template membrane; its `center_position` is replaced per point.
    pub membrane: MembraneConfig,
    pub geometry: CavityGeometry,
    pub method: Method,
    pub positions: Vec<f64>,
    /// `detunings[p][b]`: `δ` of band `b` at `positions[p]`.
    pub detunings: Vec<Vec<f64>>,
    /// `compositions[p][b]`: coefficients of band `b` over `mode_set`.
    pub compositions: Vec<Vec<Vec<f64>>>,
    /// Smallest overlap between consecutive assigned eigenvectors.
    pub min_overlap: f64,
    pub warnings: Vec<String>,
}

impl BandStructure {
    pub fn tilts(&self) -> (f64, f64) {
        (self.membrane.tilt_y, self.membrane.tilt_z)
    }

    pub fn band_count(&self) -> usize {
        self.mode_set.len()
    }

    /// `Δω/ω0` of band `b` at point `p`.
    pub fn frequency_shift(&self, p: usize, b: usize) -> f64 {
        self.detunings[p][b] / 2.0
    }

    pub fn detuning_hz(&self, p: usize, b: usize) -> f64 {
        self.frequency_shift(p, b) * self.geometry.optical_frequency_hz()
    }

    pub fn detuning_fsr(&self, p: usize, b: usize) -> f64 {
        self.frequency_shift(p, b) / self.geometry.fsr_fraction()
    }
}

#[derive(Debug, Clone)]
struct Model {
    mode_set: Vec<ModeIndex>,
    membrane: MembraneConfig,
    geometry: CavityGeometry,
    method: Method,
}

impl Model {
    fn from_bands(bs: &BandStructure) -> Self {
        Self {
            mode_set: bs.mode_set.clone(),
            membrane: bs.membrane,
            geometry: bs.geometry,
            method: bs.method,
        }
    }

    fn membrane_at(&self, x: f64) -> MembraneConfig {
        MembraneConfig {
            center_position: x,
            ..self.membrane
        }
    }

    fn operator(&self, x: f64) -> Result<DMatrix<f64>> {
        Ok(assemble_matrix(&self.mode_set, &self.membrane_at(x), &self.geometry, self.method)?.operator())
    }

    fn solve(&self, x: f64) -> Result<DetuningSolution> {
        Ok(solve_symmetric(&self.operator(x)?))
    }

    fn element(&self, i: usize, x: f64) -> Result<f64> {
        let m = self.membrane_at(x);
        let v = self.method.element(self.mode_set[i], self.mode_set[i], &m, &self.geometry)?;
        Ok(fractional_splitting(self.mode_set[0], self.mode_set[i], &self.geometry) - v)
    }
}

fn check_positions(positions: &[f64]) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::InvalidArgument("empty position grid".into()));
    }
    if positions.iter().any(|x| !x.is_finite()) || positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("position grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Diagonalizes the coupling matrix at every position (in parallel, collected
/// in order) and links bands between neighbouring points by maximal overlap.
pub fn band_sweep(
    positions: &[f64],
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
    mode_set: &[ModeIndex],
    method: Method,
) -> Result<BandStructure> {
    check_positions(positions)?;
    membrane.validate()?;
    let model = Model {
        mode_set: mode_set.to_vec(),
        membrane: *membrane,
        geometry: *geom,
        method,
    };
    let mut solutions = positions
        .par_iter()
        .map(|&x| model.solve(x))
        .collect::<Result<Vec<_>>>()?;
    let (perms, min_overlap) = track(&mut solutions);
    let detunings = perms
        .iter()
        .zip(&solutions)
        .map(|(perm, sol)| perm.iter().map(|&c| sol.eigenvalues[c]).collect())
        .collect();
    let compositions = perms
        .iter()
        .zip(&solutions)
        .map(|(perm, sol)| perm.iter().map(|&c| sol.eigenvectors[c].clone()).collect())
        .collect();
    let mut warnings = Vec::new();
    if method != Method::Numeric {
        let far = positions
            .iter()
            .any(|&x| outside_near_waist(&model.membrane_at(x)));
        if far {
            warnings.push("sweep leaves the near-waist region (|x0| > 1 mm); analytic elements lose accuracy".into());
        }
    }
    Ok(BandStructure {
        mode_set: mode_set.to_vec(),
        membrane: *membrane,
        geometry: *geom,
        method,
        positions: positions.to_vec(),
        detunings,
        compositions,
        min_overlap,
        warnings,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn canonical_sign(v: &mut [f64]) {
    let lead = (0..v.len()).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

// Inside an exactly degenerate cluster the solver's basis is arbitrary;
// replace it by the previous vectors projected into the cluster subspace.
fn align_degenerate(sol: &mut DetuningSolution, prev: &[Vec<f64>]) {
    let n = sol.eigenvalues.len();
    let scale = sol.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && sol.eigenvalues[end] - sol.eigenvalues[end - 1] <= tol {
            end += 1;
        }
        if end - start > 1 {
            let basis: Vec<Vec<f64>> = sol.eigenvectors[start..end].to_vec();
            let project = |v: &[f64]| -> Vec<f64> {
                let mut out = vec![0.0; v.len()];
                for q in &basis {
                    let c = dot(v, q);
                    out.iter_mut().zip(q).for_each(|(o, qi)| *o += c * qi);
                }
                out
            };
            let mut candidates: Vec<(f64, Vec<f64>)> = prev
                .iter()
                .map(|p| {
                    let pr = project(p);
                    (dot(&pr, &pr), pr)
                })
                .collect();
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut chosen: Vec<Vec<f64>> = Vec::new();
            for (_, mut v) in candidates {
                if chosen.len() == end - start {
                    break;
                }
                for c in &chosen {
                    let d = dot(&v, c);
                    v.iter_mut().zip(c).for_each(|(x, ci)| *x -= d * ci);
                }
                let norm = dot(&v, &v).sqrt();
                if norm > 1e-6 {
                    v.iter_mut().for_each(|x| *x /= norm);
                    canonical_sign(&mut v);
                    chosen.push(v);
                }
            }
            if chosen.len() == end - start {
                sol.eigenvectors[start..end].clone_from_slice(&chosen);
            }
        }
        start = end;
    }
}

fn track(solutions: &mut [DetuningSolution]) -> (Vec<Vec<usize>>, f64) {
    let n = solutions[0].eigenvalues.len();
    let mut perms: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut min_overlap: f64 = 1.0;
    for p in 1..solutions.len() {
        let prev: Vec<Vec<f64>> = perms[p - 1]
            .iter()
            .map(|&c| solutions[p - 1].eigenvectors[c].clone())
            .collect();
        align_degenerate(&mut solutions[p], &prev);
        let cur = &solutions[p].eigenvectors;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
        for (b, pv) in prev.iter().enumerate() {
            for (c, cv) in cur.iter().enumerate() {
                pairs.push((dot(pv, cv).abs(), b, c));
            }
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut perm = vec![usize::MAX; n];
        let mut used = vec![false; n];
        for (ov, b, c) in pairs {
            if perm[b] == usize::MAX && !used[c] {
                perm[b] = c;
                used[c] = true;
                min_overlap = min_overlap.min(ov);
            }
        }
        perms.push(perm);
    }
    (perms, min_overlap)
}

/// Uncoupled band of one mode: `Δω/ω0 = −V_ii/2` relative to that mode's own
/// empty-cavity resonance, from the closed-form element.
pub fn diagonal_band(
    mode: ModeIndex,
    positions: &[f64],
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
) -> Result<Vec<f64>> {
    check_positions(positions)?;
    membrane.validate()?;
    Ok(positions
        .par_iter()
        .map(|&x| {
            let m = MembraneConfig {
                center_position: x,
                ..*membrane
            };
            -crate::coupling::vij_analytic(mode, mode, &m, geom) / 2.0
        })
        .collect())
}

/// One uncoupled band of a full spectrum diagram, in free spectral ranges,
/// wrapped into `[−½, ½)` around the reference singlet.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumBand {
    pub mode: ModeIndex,
    pub detuning_fsr: Vec<f64>,
}

/// Diagonal bands of every mode with `m + n ≤ max_order` at the reference
/// longitudinal index.
pub fn full_spectrum(
    max_order: u32,
    positions: &[f64],
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
) -> Result<Vec<SpectrumBand>> {
    let l = geom.reference_longitudinal_index();
    let reference = ModeIndex::new(l, 0, 0);
    let fsr = geom.fsr_fraction();
    (0..=max_order)
        .flat_map(|order| ModeIndex::manifold(l, order))
        .map(|mode| {
            let offset = fractional_splitting(reference, mode, geom) / 2.0;
            let band = diagonal_band(mode, positions, membrane, geom)?;
            let detuning_fsr = band
                .iter()
                .map(|v| {
                    let u = (offset + v) / fsr;
                    u - (u + 0.5).floor()
                })
                .collect();
            Ok(SpectrumBand { mode, detuning_fsr })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CrossingLabel {
    TR,
    TL,
    BR,
    BL,
    /// Singlet crossing a parity-forbidden partner (odd `m` or `n`).
    Forbidden,
}

impl CrossingLabel {
    pub const GAPS: [CrossingLabel; 4] = [CrossingLabel::TR, CrossingLabel::TL, CrossingLabel::BR, CrossingLabel::BL];

    pub fn as_str(&self) -> &'static str {
        match self {
            CrossingLabel::TR => "TR",
            CrossingLabel::TL => "TL",
            CrossingLabel::BR => "BR",
            CrossingLabel::BL => "BL",
            CrossingLabel::Forbidden => "S11",
        }
    }
}

/// Right-hand crossings are those where the singlet band falls (`δ_s`
/// decreasing with `x0`). With this choice the TR gap passes through zero
/// for a modest positive tilt `α_z`.
pub const RIGHT_SINGLET_SLOPE: f64 = -1.0;

#[derive(Debug, Clone, Serialize)]
pub struct AvoidedCrossing {
    pub label: CrossingLabel,
    pub center_position: f64,
    /// Minimum separation of the hybrid pair, Hz.
    pub gap: f64,
    /// Asymptotic slope `a` of each branch relative to the pair mean, Hz/m.
    pub asymptotic_slope: f64,
    /// Turning-point curvature of each branch relative to the pair mean, Hz/m².
    pub curvature: f64,
    pub effective_reflectivity: Option<f64>,
    /// Detuning of the pair mean at the center, Hz.
    pub detuning: f64,
    /// Dominant mode of the non-singlet partner.
    pub partner: ModeIndex,
    /// Set when the even triplet states are degenerate at the crossing (aligned
    /// membrane); the single bright crossing then carries both T and B labels.
    pub degenerate: bool,
}

impl AvoidedCrossing {
    /// `2a²/Δf`, the ideal two-level turning-point curvature.
    pub fn hyperbola_curvature(&self) -> f64 {
        2.0 * self.asymptotic_slope.powi(2) / self.gap
    }
}

struct Indices {
    singlet: usize,
    triplet: Vec<usize>,
}

fn indices(mode_set: &[ModeIndex]) -> Result<Indices> {
    let singlet = mode_set
        .iter()
        .position(|m| m.order() == 0)
        .ok_or_else(|| Error::ModeSet("crossing analysis needs a TEM00 mode in the set".into()))?;
    let triplet: Vec<usize> = (0..mode_set.len()).filter(|&i| mode_set[i].order() == 2).collect();
    if triplet.is_empty() {
        return Err(Error::ModeSet("crossing analysis needs the m+n = 2 manifold".into()));
    }
    Ok(Indices { singlet, triplet })
}

fn is_odd(mode: ModeIndex) -> bool {
    mode.m % 2 == 1 || mode.n % 2 == 1
}

// The eigenvector with most weight on `v` and its nearest neighbour in
// energy among those overlapping the span of `v` and the singlet `s`, as
// sorted indices. Exactly decoupled levels are skipped.
fn pair_on(sol: &DetuningSolution, v: &[f64], s: usize) -> (usize, usize) {
    let e = &sol.eigenvalues;
    let w = |c: usize| dot(&sol.eigenvectors[c], v).powi(2);
    let span = |c: usize| w(c) + sol.eigenvectors[c][s].powi(2);
    let c = (0..e.len()).max_by(|&a, &b| w(a).total_cmp(&w(b)).then(b.cmp(&a))).unwrap();
    let other = (0..e.len())
        .filter(|&o| o != c && span(o) > DECOUPLED)
        .min_by(|&a, &b| (e[a] - e[c]).abs().total_cmp(&(e[b] - e[c]).abs()).then(a.cmp(&b)))
        .unwrap_or(c);
    (c.min(other), c.max(other))
}

const DECOUPLED: f64 = 1e-12;

/// Eigenstate of the `m + n = 2` block of the operator, embedded in the full
/// mode basis.
#[derive(Debug, Clone)]
struct TripletState {
    energy: f64,
    vector: Vec<f64>,
    odd: bool,
    /// Member of an exactly degenerate even pair: `Some(true)` for the
    /// combination carrying all the singlet coupling, `Some(false)` for the
    /// dark one.
    bright: Option<bool>,
}

struct Diabatic {
    singlet: f64,
    triplet: Vec<TripletState>,
    op: DMatrix<f64>,
}

impl Model {
    // Inside a degenerate cluster pick a basis of definite parity, then
    // rotate the even members so that one carries all the singlet coupling.
    fn split_cluster(&self, cluster: &mut [TripletState], op: &DMatrix<f64>, s: usize) {
        let n = op.nrows();
        let c = cluster.len();
        let parity = |i: usize| if is_odd(self.mode_set[i]) { -1.0 } else { 1.0 };
        let p = DMatrix::from_fn(c, c, |a, b| (0..n).map(|i| cluster[a].vector[i] * parity(i) * cluster[b].vector[i]).sum());
        let psol = solve_symmetric(&p);
        let rotated: Vec<Vec<f64>> = psol
            .eigenvectors
            .iter()
            .map(|w| (0..n).map(|i| (0..c).map(|a| w[a] * cluster[a].vector[i]).sum()).collect())
            .collect();
        let (even, odd): (Vec<usize>, Vec<usize>) = (0..c).partition(|&a| psol.eigenvalues[a] > 0.0);
        let coupling = |v: &[f64]| -> f64 { (0..n).map(|j| op[(s, j)] * v[j]).sum() };
        let mut out: Vec<(Vec<f64>, bool, Option<bool>)> = odd.iter().map(|&a| (rotated[a].clone(), true, None)).collect();
        if even.len() > 1 {
            let cs: Vec<f64> = even.iter().map(|&a| coupling(&rotated[a])).collect();
            let norm = cs.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                let bright: Vec<f64> = (0..n).map(|i| even.iter().zip(&cs).map(|(&a, c)| c / norm * rotated[a][i]).sum()).collect();
                // Gram-Schmidt the remaining even vectors against the bright one.
                let mut basis = vec![bright.clone()];
                for &a in &even {
                    let mut v = rotated[a].clone();
                    for q in &basis {
                        let d = dot(&v, q);
                        v.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
                    }
                    let nv = dot(&v, &v).sqrt();
                    if nv > 1e-6 && basis.len() < even.len() {
                        v.iter_mut().for_each(|x| *x /= nv);
                        basis.push(v);
                    }
                }
                for (i, v) in basis.into_iter().enumerate() {
                    out.push((v, false, Some(i == 0)));
                }
            } else {
                out.extend(even.iter().map(|&a| (rotated[a].clone(), false, Some(false))));
            }
        } else {
            out.extend(even.iter().map(|&a| (rotated[a].clone(), false, None)));
        }
        // Dark and odd states first so the bright one takes the top slot.
        out.sort_by_key(|(_, odd, bright)| (!*odd, *bright == Some(true)));
        for (state, (vector, odd, bright)) in cluster.iter_mut().zip(out) {
            state.vector = vector;
            state.odd = odd;
            state.bright = bright;
        }
    }

    fn diabatic(&self, idx: &Indices, x: f64) -> Result<Diabatic> {
        let op = self.operator(x)?;
        let t = &idx.triplet;
        let n = op.nrows();
        let block = DMatrix::from_fn(t.len(), t.len(), |i, j| op[(t[i], t[j])]);
        let tsol = solve_symmetric(&block);
        let mut triplet: Vec<TripletState> = tsol
            .eigenvalues
            .iter()
            .zip(&tsol.eigenvectors)
            .map(|(&energy, v)| {
                let mut vector = vec![0.0; n];
                t.iter().zip(v).for_each(|(&i, &c)| vector[i] = c);
                let odd_weight: f64 = t.iter().zip(v).filter(|(&i, _)| is_odd(self.mode_set[i])).map(|(_, c)| c * c).sum();
                TripletState {
                    energy,
                    vector,
                    odd: odd_weight > 0.5,
                    bright: None,
                }
            })
            .collect();
        let scale = op.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let s = idx.singlet;
        let mut start = 0;
        while start < triplet.len() {
            let mut end = start + 1;
            while end < triplet.len() && triplet[end].energy - triplet[end - 1].energy <= 1e-9 * scale {
                end += 1;
            }
            if end - start > 1 {
                self.split_cluster(&mut triplet[start..end], &op, s);
            }
            start = end;
        }
        Ok(Diabatic {
            singlet: op[(s, s)],
            triplet,
            op,
        })
    }
}

/// Locates singlet crossings, refines each, and labels it.
///
/// Diabatic crossings are the roots of `M_ss − E_k`, where `E_k` runs over
/// the sorted eigenvalues of the triplet block. Around each root the gap is
/// the minimum separation of the two full eigenstates lying in the span of
/// the singlet and that triplet state. The asymptotic slope `a` is half the
/// difference of the diabatic slopes, and the curvature is half the second
/// derivative of the pair separation at its minimum, taken with a step of a
/// twentieth of the gap width.
///
/// Labels: the side (R/L) follows the sign of the singlet diabatic slope,
/// the level (T/B) whether the partner is the upper or lower even triplet
/// state, and crossings with an odd partner are [`CrossingLabel::Forbidden`].
pub fn find_crossings(bs: &BandStructure) -> Result<Vec<AvoidedCrossing>> {
    locate_crossings(&Model::from_bands(bs), &bs.positions)
}

fn locate_crossings(model: &Model, positions: &[f64]) -> Result<Vec<AvoidedCrossing>> {
    let idx = indices(&model.mode_set)?;
    let n = positions.len();
    if n < 2 {
        return Err(Error::NoCrossing);
    }
    let rows = positions
        .par_iter()
        .map(|&x| {
            let d = model.diabatic(&idx, x)?;
            Ok(d.triplet.iter().map(|t| d.singlet - t.energy).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let map = ReflectivityMap::new(model.geometry.length(), model.geometry.wavelength())?;
    let mut found = Vec::new();
    for p in 0..n - 1 {
        for k in 0..idx.triplet.len() {
            if (rows[p][k] < 0.0) != (rows[p + 1][k] < 0.0) {
                found.extend(refine(model, &idx, k, positions[p], positions[p + 1], &map)?);
            }
        }
    }
    if found.is_empty() {
        return Err(Error::NoCrossing);
    }
    found.sort_by(|a: &AvoidedCrossing, b| a.center_position.total_cmp(&b.center_position).then(a.label.cmp(&b.label)));
    Ok(found)
}

const SCAN_POINTS: usize = 40;

fn refine(model: &Model, idx: &Indices, k: usize, left: f64, right: f64, map: &ReflectivityMap) -> Result<Vec<AvoidedCrossing>> {
    let s = idx.singlet;
    let f0 = model.geometry.optical_frequency_hz();
    let failure = std::cell::RefCell::new(None);
    let offset = |x: f64| -> f64 {
        match model.diabatic(idx, x) {
            Ok(d) => d.singlet - d.triplet[k].energy,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let root = crate::roots::brent(&offset, left, right, 1e-16, 200);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let xd = root?;
    let d = model.diabatic(idx, xd)?;
    let state = d.triplet[k].clone();
    if state.bright == Some(false) {
        return Ok(Vec::new());
    }
    let n = d.op.nrows();
    let coupling: f64 = (0..n).map(|j| d.op[(s, j)] * state.vector[j]).sum();
    let h = model.geometry.wavelength() / 2.0e5;
    let singlet_slope = (model.element(s, xd + h)? - model.element(s, xd - h)?) / (2.0 * h);
    let relative_slope = (offset(xd + h) - offset(xd - h)) / (2.0 * h);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let a = relative_slope.abs() / 2.0;

    let scale = d.op.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let exact = coupling.abs() <= 1e-10 * scale;
    let pair = |x: f64| -> Result<(f64, f64)> {
        let sol = model.solve(x)?;
        let (lo, hi) = pair_on(&sol, &state.vector, s);
        Ok((sol.eigenvalues[hi] - sol.eigenvalues[lo], 0.5 * (sol.eigenvalues[hi] + sol.eigenvalues[lo])))
    };
    let width = 2.0 * coupling.abs() / (2.0 * a).max(f64::MIN_POSITIVE);
    let (xc, gap) = if exact {
        (xd, 0.0)
    } else if a > 0.0 {
        let sep = |x: f64| match pair(x) {
            Ok(p) => p.0,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::INFINITY
            }
        };
        // Other levels coupled to the singlet can displace the minimum by
        // more than this crossing's own width.
        let total: f64 = d.triplet.iter().map(|t| (0..n).map(|j| d.op[(s, j)] * t.vector[j]).sum::<f64>().abs()).sum();
        let reach = 4.0 * width.max(2.0 * total / (2.0 * a));
        let samples: Vec<(f64, f64)> = (0..=SCAN_POINTS)
            .map(|i| {
                let x = xd - reach + 2.0 * reach * i as f64 / SCAN_POINTS as f64;
                (x, sep(x))
            })
            .collect();
        let best = (0..samples.len()).min_by(|&i, &j| samples[i].1.total_cmp(&samples[j].1)).unwrap();
        let lo = samples[best.saturating_sub(1)].0;
        let hi = samples[(best + 1).min(SCAN_POINTS)].0;
        let found = golden_minimize(sep, lo, hi, 100);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        found
    } else {
        (xd, pair(xd)?.0)
    };
    let mean = if exact { (d.singlet + state.energy) / 2.0 } else { pair(xc)?.1 };
    let curvature = if gap > 0.0 && a > 0.0 {
        let step = gap / (2.0 * a) / 20.0;
        (pair(xc + step)?.0 + pair(xc - step)?.0 - 2.0 * gap) / (2.0 * step * step)
    } else {
        f64::INFINITY
    };

    let partner = (0..n)
        .filter(|&i| i != s)
        .max_by(|&i, &j| state.vector[i].abs().total_cmp(&state.vector[j].abs()))
        .map(|i| model.mode_set[i])
        .unwrap();
    let curvature_hz = curvature / 2.0 * f0;
    let base = AvoidedCrossing {
        label: CrossingLabel::Forbidden,
        center_position: xc,
        gap: gap / 2.0 * f0,
        asymptotic_slope: a / 2.0 * f0,
        curvature: curvature_hz,
        effective_reflectivity: if curvature_hz.is_finite() { map.invert(curvature_hz).ok() } else { None },
        detuning: mean / 2.0 * f0,
        partner,
        degenerate: state.bright.is_some(),
    };
    if state.odd {
        return Ok(vec![base]);
    }
    let right = singlet_slope * RIGHT_SINGLET_SLOPE > 0.0;
    let label = |top: bool| match (top, right) {
        (true, true) => CrossingLabel::TR,
        (true, false) => CrossingLabel::TL,
        (false, true) => CrossingLabel::BR,
        (false, false) => CrossingLabel::BL,
    };
    if base.degenerate {
        return Ok(vec![
            AvoidedCrossing {
                label: label(true),
                ..base.clone()
            },
            AvoidedCrossing {
                label: label(false),
                ..base
            },
        ]);
    }
    let even: Vec<usize> = (0..d.triplet.len()).filter(|&j| !d.triplet[j].odd).collect();
    let top = even.last() == Some(&k) || even.len() < 2;
    Ok(vec![AvoidedCrossing { label: label(top), ..base }])
}

/// Gap surfaces for the four labelled crossings.
#[derive(Debug, Clone, Serialize)]
pub struct GapMap {
    pub positions: Vec<f64>,
    /// Values of `α_z`; `α_y` is taken from the template membrane.
    pub tilts: Vec<f64>,
    /// `gaps[label][tilt][position]` in Hz; `None` when that crossing was not
    /// found in the period following the position.
    pub gaps: Vec<(CrossingLabel, Vec<Vec<Option<f64>>>)>,
}

impl GapMap {
    pub fn gap(&self, label: CrossingLabel, tilt: usize, position: usize) -> Option<f64> {
        self.gaps.iter().find(|(l, _)| *l == label).and_then(|(_, g)| g[tilt][position])
    }
}

/// Points per half-wavelength period used by [`gaps_near`].
pub const PERIOD_SAMPLES: usize = 96;

/// The four labelled crossings in the half-wavelength period starting at `x0`.
pub fn gaps_near(
    x0: f64,
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
    mode_set: &[ModeIndex],
    method: Method,
) -> Result<Vec<AvoidedCrossing>> {
    let period = geom.wavelength() / 2.0;
    let positions: Vec<f64> = (0..=PERIOD_SAMPLES)
        .map(|i| x0 + period * i as f64 / PERIOD_SAMPLES as f64)
        .collect();
    membrane.validate()?;
    let model = Model {
        mode_set: mode_set.to_vec(),
        membrane: *membrane,
        geometry: *geom,
        method,
    };
    match locate_crossings(&model, &positions) {
        Ok(c) => Ok(c),
        Err(Error::NoCrossing) => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}

pub fn gap_map(
    positions: &[f64],
    tilts: &[f64],
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
    mode_set: &[ModeIndex],
    method: Method,
) -> Result<GapMap> {
    check_positions(positions)?;
    if tilts.is_empty() {
        return Err(Error::InvalidArgument("empty tilt grid".into()));
    }
    let cells: Vec<(usize, usize)> = (0..tilts.len())
        .flat_map(|t| (0..positions.len()).map(move |p| (t, p)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(t, p)| {
            let m = MembraneConfig {
                tilt_z: tilts[t],
                ..*membrane
            };
            gaps_near(positions[p], &m, geom, mode_set, method)
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps = CrossingLabel::GAPS
        .iter()
        .map(|&label| {
            let grid = (0..tilts.len())
                .map(|t| {
                    (0..positions.len())
                        .map(|p| {
                            results[t * positions.len() + p]
                                .iter()
                                .find(|c| c.label == label)
                                .map(|c| c.gap)
                        })
                        .collect()
                })
                .collect();
            (label, grid)
        })
        .collect();
    Ok(GapMap {
        positions: positions.to_vec(),
        tilts: tilts.to_vec(),
        gaps,
    })
}

/// Splitting (Hz) between the two even eigenstates of the `m + n = 2` block,
/// taken at the point of the half-wavelength period after `x0` where the
/// singlet is furthest from the triplet. The singlet is left out, so the
/// result is the far-from-crossing limit and vanishes for an aligned
/// membrane.
pub fn triplet_splitting(
    x0: f64,
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
    mode_set: &[ModeIndex],
    method: Method,
) -> Result<f64> {
    let idx = indices(mode_set)?;
    let model = Model {
        mode_set: mode_set.to_vec(),
        membrane: *membrane,
        geometry: *geom,
        method,
    };
    let even: Vec<usize> = idx.triplet.iter().copied().filter(|&i| !is_odd(mode_set[i])).collect();
    if even.len() < 2 {
        return Err(Error::ModeSet("splitting needs both even triplet modes".into()));
    }
    let period = geom.wavelength() / 2.0;
    let mut best = (f64::NEG_INFINITY, x0);
    for i in 0..64 {
        let x = x0 + period * i as f64 / 64.0;
        let es = model.element(idx.singlet, x)?;
        let mut et = 0.0;
        for &j in &even {
            et += model.element(j, x)?;
        }
        let distance = (es - et / even.len() as f64).abs();
        if distance > best.0 {
            best = (distance, x);
        }
    }
    let d = model.diabatic(&idx, best.1)?;
    let energies: Vec<f64> = d.triplet.iter().filter(|t| !t.odd).map(|t| t.energy).collect();
    let spread = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - energies.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(spread / 2.0 * geom.optical_frequency_hz())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (CavityGeometry, Vec<ModeIndex>) {
        let g = CavityGeometry::default();
        let set = ModeIndex::singlet_triplet(g.reference_longitudinal_index());
        (g, set)
    }

    fn period_grid(g: &CavityGeometry, x0: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| x0 + g.wavelength() / 2.0 * i as f64 / n as f64).collect()
    }

    #[test]
    fn zero_contrast_gives_flat_bands() {
        let (g, set) = setup();
        let mut m = MembraneConfig::default();
        m.refractive_index = 1.0;
        let bs = band_sweep(&period_grid(&g, 1e-4, 20), &m, &g, &set, Method::Analytic).unwrap();
        let split = fractional_splitting(set[0], set[1], &g);
        for row in &bs.detunings {
            let mut r = row.clone();
            r.sort_by(f64::total_cmp);
            assert_eq!(r[0], 0.0);
            assert!(r[1..].iter().all(|&d| (d - split).abs() < 1e-20));
        }
    }

    #[test]
    fn bands_are_continuous_and_below_unperturbed() {
        let (g, set) = setup();
        let m = MembraneConfig::default().with_tilt(0.0, 0.4e-3);
        let bs = band_sweep(&period_grid(&g, 5e-4, 400), &m, &g, &set, Method::Analytic).unwrap();
        // Narrow gaps are resolved by only a few grid points, so overlaps
        // dip there; the band energies must still be continuous.
        assert!(bs.min_overlap > 0.5, "{}", bs.min_overlap);
        let step = bs.positions[1] - bs.positions[0];
        let max_slope = 2.0 * std::f64::consts::PI / (g.wavelength() / 2.0) * 4.5e-6;
        for w in bs.detunings.windows(2) {
            for b in 0..4 {
                assert!((w[1][b] - w[0][b]).abs() < 1.5 * max_slope * step);
            }
        }
        let split = fractional_splitting(set[0], set[1], &g);
        for row in &bs.detunings {
            assert_eq!(row.len(), 4);
            assert!(row.iter().all(|&d| d <= split + 1e-12));
        }
    }

    #[test]
    fn diagonal_band_amplitude() {
        let (g, set) = setup();
        let m = MembraneConfig::default();
        let band = diagonal_band(set[0], &period_grid(&g, 0.0, 400), &m, &g).unwrap();
        let p2p = band.iter().cloned().fold(f64::MIN, f64::max) - band.iter().cloned().fold(f64::MAX, f64::min);
        let ctx = crate::coupling::PerturbationContext::new(set[0], set[0], &m, &g);
        let expect = ctx.thickness_correction * m.sheet_weight() / g.length();
        assert!((p2p - expect).abs() < 1e-3 * expect);
        // Top of the band sits slightly below zero.
        let top = band.iter().cloned().fold(f64::MIN, f64::max);
        let residual = -m.sheet_weight() / (2.0 * g.length()) * (1.0 - ctx.thickness_correction);
        assert!(top < 0.0 && (top - residual).abs() < 1e-3 * residual.abs());
    }

    #[test]
    fn crossings_match_two_level_gap() {
        let (g, set) = setup();
        let m = MembraneConfig::default().with_tilt(0.0, 0.4e-3);
        let bs = band_sweep(&period_grid(&g, 5e-4, 200), &m, &g, &set, Method::Analytic).unwrap();
        let crossings = find_crossings(&bs).unwrap();
        let labels: Vec<_> = crossings.iter().map(|c| c.label).collect();
        for l in CrossingLabel::GAPS {
            assert_eq!(labels.iter().filter(|&&x| x == l).count(), 1, "{labels:?}");
        }
        // Single-axis tilt leaves TEM11 uncoupled: exact crossings.
        let forbidden: Vec<_> = crossings.iter().filter(|c| c.label == CrossingLabel::Forbidden).collect();
        assert_eq!(forbidden.len(), 2);
        assert!(forbidden.iter().all(|c| c.gap == 0.0 && c.effective_reflectivity.is_none()));

        // Aligned: one bright partner per side, an isolated two-level crossing.
        let bs = band_sweep(&period_grid(&g, 5e-4, 200), &MembraneConfig::default(), &g, &set, Method::Analytic).unwrap();
        for c in find_crossings(&bs).unwrap().iter().filter(|c| c.label != CrossingLabel::Forbidden) {
            assert!(c.degenerate);
            let mat = assemble_matrix(&set, &MembraneConfig::at(c.center_position), &g, Method::Analytic).unwrap();
            let bright = (mat.elements[0][1].powi(2) + mat.elements[0][3].powi(2)).sqrt();
            let two_level = 2.0 * bright / 2.0 * g.optical_frequency_hz();
            assert!((c.gap - two_level).abs() < 0.01 * c.gap, "{:?}: {} vs {}", c.label, c.gap, two_level);
            let hyp = c.hyperbola_curvature();
            assert!((c.curvature - hyp).abs() < 0.02 * hyp, "{} vs {}", c.curvature, hyp);
        }
    }

    #[test]
    fn aligned_gaps_pair_up_and_tilt_opens_top() {
        let (g, set) = setup();
        let get = |cs: &[AvoidedCrossing], l| cs.iter().find(|c| c.label == l).unwrap().gap;
        let aligned = gaps_near(3e-4, &MembraneConfig::default(), &g, &set, Method::Unlinearized).unwrap();
        let (tr, tl) = (get(&aligned, CrossingLabel::TR), get(&aligned, CrossingLabel::TL));
        assert!((tr - tl).abs() < 5e-3 * tr);
        let tilted = gaps_near(0.0, &MembraneConfig::default().with_tilt(0.0, 0.4e-3), &g, &set, Method::Analytic).unwrap();
        let aligned0 = gaps_near(0.0, &MembraneConfig::default(), &g, &set, Method::Analytic).unwrap();
        assert!(get(&tilted, CrossingLabel::TL) > get(&aligned0, CrossingLabel::TL));
    }
}

//! Spin systems: detunings, dipolar couplings, geometry realization, and
//! construction of the internal Hamiltonian
//!
//! `H_in = sum_i d_i Iz^i + sum_{i<j} a_ij (3 Iz^i Iz^j - I^i . I^j)`
//!
//! in either coefficient backend.

use std::fmt::Write as _;

use num_rational::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra::{Axis, Coeff, Exact, NumericOp, OperatorSum, SymbolicOp};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: String, value: f64 },

    #[error("{what}: {detail}")]
    Invalid { what: String, detail: String },

    #[error("spins {i} and {j} are closer than {min} (distance {dist})")]
    SpinsTooClose { i: usize, j: usize, dist: f64, min: f64 },

    #[error("could not place {requested} spins with the requested minimum separation (placed {placed} after {attempts} attempts)")]
    PlacementFailed { requested: usize, placed: usize, attempts: usize },

    #[error("{what}: expected {expected} entries, got {got}")]
    WrongLength { what: String, expected: usize, got: usize },

    #[error("system must contain at least one spin")]
    Empty,

    #[error("system text, line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

/// Exponent applied to the cosine in the dipolar angular factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnglePower {
    One,
    Two,
}

impl AnglePower {
    pub fn as_u8(self) -> u8 {
        match self {
            AnglePower::One => 1,
            AnglePower::Two => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(AnglePower::One),
            2 => Some(AnglePower::Two),
            _ => None,
        }
    }
}

impl Default for AnglePower {
    /// The physical secular coupling uses the squared cosine.
    fn default() -> Self {
        AnglePower::Two
    }
}

/// Parameters of the pair coupling `a_ij = prefactor (1 - 3 cos^p theta) / r^3`,
/// with `theta` measured from `field_axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct DipolarParams {
    prefactor: f64,
    angle_power: AnglePower,
    /// Unit vector; normalized at construction.
    field_axis: [f64; 3],
}

impl DipolarParams {
    pub fn new(prefactor: f64, angle_power: AnglePower, field_axis: [f64; 3]) -> Result<Self, SystemError> {
        if !prefactor.is_finite() {
            return Err(SystemError::NonFinite { what: "dipolar prefactor".into(), value: prefactor });
        }
        let norm = (field_axis.iter().map(|c| c * c).sum::<f64>()).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(SystemError::Invalid {
                what: "field axis".into(),
                detail: "must be a nonzero finite vector".into(),
            });
        }
        let field_axis = [field_axis[0] / norm, field_axis[1] / norm, field_axis[2] / norm];
        Ok(DipolarParams { prefactor, angle_power, field_axis })
    }

    /// Prefactor 1, squared cosine, field along +z.
    pub fn reference() -> Self {
        DipolarParams { prefactor: 1.0, angle_power: AnglePower::Two, field_axis: [0.0, 0.0, 1.0] }
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn angle_power(&self) -> AnglePower {
        self.angle_power
    }

    pub fn field_axis(&self) -> [f64; 3] {
        self.field_axis
    }

    /// Coupling constant for a pair at positions `ri`, `rj`.
    pub fn coupling(&self, ri: [f64; 3], rj: [f64; 3]) -> Result<f64, SystemError> {
        let d = [rj[0] - ri[0], rj[1] - ri[1], rj[2] - ri[2]];
        let r2 = d.iter().map(|c| c * c).sum::<f64>();
        let r = r2.sqrt();
        if !r.is_finite() {
            return Err(SystemError::NonFinite { what: "pair distance".into(), value: r });
        }
        if r == 0.0 {
            return Err(SystemError::Invalid {
                what: "pair distance".into(),
                detail: "two spins share a position".into(),
            });
        }
        let cos = (d[0] * self.field_axis[0] + d[1] * self.field_axis[1] + d[2] * self.field_axis[2]) / r;
        let angular = match self.angle_power {
            AnglePower::One => 1.0 - 3.0 * cos,
            AnglePower::Two => 1.0 - 3.0 * cos * cos,
        };
        Ok(self.prefactor * angular / (r * r * r))
    }
}

/// Index into the flat upper-triangular pair table for `i < j`.
fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    // offset of row i, then distance past the diagonal
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// A concrete spin system: per-spin detunings and pair couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystem {
    n_spins: usize,
    detunings: Vec<f64>,
    /// Upper triangle, indexed by [`pair_index`].
    couplings: Vec<f64>,
    /// Positions, when the system came from a geometry (kept for reporting).
    positions: Option<Vec<[f64; 3]>>,
}

impl SpinSystem {
    pub fn new(detunings: Vec<f64>, couplings: Vec<f64>) -> Result<Self, SystemError> {
        let n = detunings.len();
        if n == 0 {
            return Err(SystemError::Empty);
        }
        let expected = n * (n - 1) / 2;
        if couplings.len() != expected {
            return Err(SystemError::WrongLength {
                what: "pair couplings".into(),
                expected,
                got: couplings.len(),
            });
        }
        for (i, &d) in detunings.iter().enumerate() {
            if !d.is_finite() {
                return Err(SystemError::NonFinite { what: format!("detuning {i}"), value: d });
            }
        }
        for (k, &a) in couplings.iter().enumerate() {
            if !a.is_finite() {
                return Err(SystemError::NonFinite { what: format!("coupling {k}"), value: a });
            }
        }
        Ok(SpinSystem { n_spins: n, detunings, couplings, positions: None })
    }

    /// System from explicit positions: couplings follow from the dipolar law,
    /// detunings are supplied directly.
    pub fn from_positions(
        positions: Vec<[f64; 3]>,
        detunings: Vec<f64>,
        dipolar: &DipolarParams,
    ) -> Result<Self, SystemError> {
        let n = positions.len();
        if detunings.len() != n {
            return Err(SystemError::WrongLength {
                what: "detunings".into(),
                expected: n,
                got: detunings.len(),
            });
        }
        let mut couplings = Vec::with_capacity(n.saturating_sub(1) * n / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                couplings.push(dipolar.coupling(positions[i], positions[j])?);
            }
        }
        let mut sys = SpinSystem::new(detunings, couplings)?;
        sys.positions = Some(positions);
        Ok(sys)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn detuning(&self, i: usize) -> f64 {
        self.detunings[i]
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.couplings[pair_index(a, b, self.n_spins)]
    }

    pub fn positions(&self) -> Option<&[[f64; 3]]> {
        self.positions.as_deref()
    }

    /// Replace all detunings (used by drift models); lengths must match.
    pub fn with_detunings(&self, detunings: Vec<f64>) -> Result<Self, SystemError> {
        if detunings.len() != self.n_spins {
            return Err(SystemError::WrongLength {
                what: "detunings".into(),
                expected: self.n_spins,
                got: detunings.len(),
            });
        }
        let mut out = self.clone();
        out.detunings = detunings;
        Ok(out)
    }

    /// Internal Hamiltonian with float coefficients.
    pub fn hamiltonian_numeric(&self) -> NumericOp {
        build_hamiltonian(
            self.n_spins,
            |i| Coeff::from_f64(self.detunings[i]),
            |i, j| Coeff::from_f64(self.coupling(i, j)),
        )
    }

    /// Internal Hamiltonian with the float parameters embedded exactly as
    /// rationals, for cross-checking the two backends on identical input.
    pub fn hamiltonian_exact(&self) -> SymbolicOp {
        build_hamiltonian(
            self.n_spins,
            |i| <Exact as Coeff>::from_f64(self.detunings[i]),
            |i, j| <Exact as Coeff>::from_f64(self.coupling(i, j)),
        )
    }

    /// Fully symbolic Hamiltonian over free parameters `d1..dN` and `ai_j`
    /// (1-based site labels).
    pub fn hamiltonian_symbolic(n_spins: usize) -> SymbolicOp {
        build_hamiltonian(
            n_spins,
            |i| Exact::symbol(&format!("d{}", i + 1)),
            |i, j| Exact::symbol(&format!("a{}_{}", i + 1, j + 1)),
        )
    }

    /// Spectral norm of the numeric Hamiltonian, the scale that fixes
    /// perturbative time units.
    pub fn hamiltonian_norm(&self) -> f64 {
        self.hamiltonian_numeric()
            .to_dense()
            .expect("numeric coefficients")
            .spectral_norm()
    }

    /// Plain-text serialization. Floats print in shortest-roundtrip form, so
    /// a reload reproduces the system bit for bit.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "spins {}", self.n_spins);
        for (i, d) in self.detunings.iter().enumerate() {
            let _ = writeln!(out, "detuning {i} {d}");
        }
        for i in 0..self.n_spins {
            for j in (i + 1)..self.n_spins {
                let _ = writeln!(out, "coupling {i} {j} {}", self.coupling(i, j));
            }
        }
        if let Some(pos) = &self.positions {
            for (i, p) in pos.iter().enumerate() {
                let _ = writeln!(out, "position {i} {} {} {}", p[0], p[1], p[2]);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SystemError> {
        let mut n_spins: Option<usize> = None;
        let mut detunings: Vec<Option<f64>> = Vec::new();
        let mut couplings: Vec<Option<f64>> = Vec::new();
        let mut positions: Vec<Option<[f64; 3]>> = Vec::new();
        let mut saw_position = false;

        let parse_err = |line: usize, detail: &str| SystemError::Parse { line, detail: detail.to_string() };

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap();
            let rest: Vec<&str> = parts.collect();
            match key {
                "spins" => {
                    if n_spins.is_some() {
                        return Err(parse_err(line_no, "duplicate 'spins' line"));
                    }
                    let n: usize = rest
                        .first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "expected 'spins <count>'"))?;
                    if n == 0 {
                        return Err(SystemError::Empty);
                    }
                    detunings = vec![None; n];
                    couplings = vec![None; n * (n - 1) / 2];
                    positions = vec![None; n];
                    n_spins = Some(n);
                }
                "detuning" => {
                    let n = n_spins.ok_or_else(|| parse_err(line_no, "'spins' must come first"))?;
                    if rest.len() != 2 {
                        return Err(parse_err(line_no, "expected 'detuning <site> <value>'"));
                    }
                    let i: usize = rest[0].parse().map_err(|_| parse_err(line_no, "bad site index"))?;
                    let v: f64 = rest[1].parse().map_err(|_| parse_err(line_no, "bad value"))?;
                    if i >= n {
                        return Err(parse_err(line_no, "site index out of range"));
                    }
                    detunings[i] = Some(v);
                }
                "coupling" => {
                    let n = n_spins.ok_or_else(|| parse_err(line_no, "'spins' must come first"))?;
                    if rest.len() != 3 {
                        return Err(parse_err(line_no, "expected 'coupling <i> <j> <value>'"));
                    }
                    let i: usize = rest[0].parse().map_err(|_| parse_err(line_no, "bad site index"))?;
                    let j: usize = rest[1].parse().map_err(|_| parse_err(line_no, "bad site index"))?;
                    let v: f64 = rest[2].parse().map_err(|_| parse_err(line_no, "bad value"))?;
                    if i >= j || j >= n {
                        return Err(parse_err(line_no, "expected i < j < spin count"));
                    }
                    couplings[pair_index(i, j, n)] = Some(v);
                }
                "position" => {
                    let n = n_spins.ok_or_else(|| parse_err(line_no, "'spins' must come first"))?;
                    if rest.len() != 4 {
                        return Err(parse_err(line_no, "expected 'position <site> <x> <y> <z>'"));
                    }
                    let i: usize = rest[0].parse().map_err(|_| parse_err(line_no, "bad site index"))?;
                    if i >= n {
                        return Err(parse_err(line_no, "site index out of range"));
                    }
                    let mut p = [0.0; 3];
                    for (k, s) in rest[1..].iter().enumerate() {
                        p[k] = s.parse().map_err(|_| parse_err(line_no, "bad coordinate"))?;
                    }
                    positions[i] = Some(p);
                    saw_position = true;
                }
                other => {
                    return Err(parse_err(line_no, &format!("unknown key '{other}'")));
                }
            }
        }

        let n = n_spins.ok_or_else(|| parse_err(0, "missing 'spins' line"))?;
        let detunings: Vec<f64> = detunings
            .into_iter()
            .enumerate()
            .map(|(i, d)| d.ok_or_else(|| parse_err(0, &format!("missing detuning for site {i}"))))
            .collect::<Result<_, _>>()?;
        let couplings: Vec<f64> = couplings
            .into_iter()
            .enumerate()
            .map(|(k, c)| c.ok_or_else(|| parse_err(0, &format!("missing coupling entry {k}"))))
            .collect::<Result<_, _>>()?;
        let mut sys = SpinSystem::new(detunings, couplings)?;
        if saw_position {
            let pos: Vec<[f64; 3]> = positions
                .into_iter()
                .enumerate()
                .map(|(i, p)| p.ok_or_else(|| parse_err(0, &format!("missing position for site {i}"))))
                .collect::<Result<_, _>>()?;
            if pos.len() != n {
                return Err(SystemError::WrongLength { what: "positions".into(), expected: n, got: pos.len() });
            }
            sys.positions = Some(pos);
        }
        Ok(sys)
    }
}

fn build_hamiltonian<C: Coeff>(
    n: usize,
    detuning: impl Fn(usize) -> C,
    coupling: impl Fn(usize, usize) -> C,
) -> OperatorSum<C> {
    let half = BigRational::new(1.into(), 2.into());
    let quarter = BigRational::new(1.into(), 4.into());
    let mut h = OperatorSum::zero(n);
    for i in 0..n {
        let iz = OperatorSum::<C>::single_spin(Axis::Z, i, n).expect("site in range");
        h = h.add(&iz.scale(&detuning(i))).expect("same size");
    }
    for i in 0..n {
        for j in (i + 1)..n {
            // 3 Iz Iz - I.I = (1/2) ZZ - (1/4) XX - (1/4) YY on the pair
            let mut pair = OperatorSum::<C>::zero(n);
            for (axis, weight) in [
                (Axis::Z, C::from_rational(&half)),
                (Axis::X, C::from_rational(&quarter).neg()),
                (Axis::Y, C::from_rational(&quarter).neg()),
            ] {
                let word = crate::algebra::PauliWord::identity(n)
                    .with_letter(i, axis.letter())
                    .with_letter(j, axis.letter());
                pair = pair
                    .add(&OperatorSum::from_terms(n, [(word, weight)]).expect("word length matches"))
                    .expect("same size");
            }
            h = h.add(&pair.scale(&coupling(i, j))).expect("same size");
        }
    }
    h
}

/// How spins are laid out in space for a random realization.
#[derive(Clone, Debug, PartialEq)]
pub enum Placement {
    /// Uniform positions in a cube of side `side`, rejecting draws closer
    /// than `min_separation` to an already placed spin.
    BoxUniform { n_spins: usize, side: f64, min_separation: f64 },
    /// Cubic lattice `dims[0] x dims[1] x dims[2]` with `spacing`, occupying
    /// `n_occupied` sites chosen at random.
    Lattice { dims: [usize; 3], spacing: f64, n_occupied: usize },
    /// Fixed positions, identical across realizations.
    Explicit { positions: Vec<[f64; 3]> },
}

impl Placement {
    pub fn n_spins(&self) -> usize {
        match self {
            Placement::BoxUniform { n_spins, .. } => *n_spins,
            Placement::Lattice { n_occupied, .. } => *n_occupied,
            Placement::Explicit { positions } => positions.len(),
        }
    }

    fn validate(&self) -> Result<(), SystemError> {
        match self {
            Placement::BoxUniform { n_spins, side, min_separation } => {
                if *n_spins == 0 {
                    return Err(SystemError::Empty);
                }
                if !side.is_finite() || *side <= 0.0 {
                    return Err(SystemError::Invalid {
                        what: "box side".into(),
                        detail: format!("must be positive and finite, got {side}"),
                    });
                }
                if !min_separation.is_finite() || *min_separation < 0.0 {
                    return Err(SystemError::Invalid {
                        what: "minimum separation".into(),
                        detail: format!("must be nonnegative and finite, got {min_separation}"),
                    });
                }
                Ok(())
            }
            Placement::Lattice { dims, spacing, n_occupied } => {
                let sites = dims[0] * dims[1] * dims[2];
                if sites == 0 {
                    return Err(SystemError::Invalid {
                        what: "lattice dims".into(),
                        detail: "every dimension must be at least 1".into(),
                    });
                }
                if *n_occupied == 0 {
                    return Err(SystemError::Empty);
                }
                if *n_occupied > sites {
                    return Err(SystemError::Invalid {
                        what: "lattice occupancy".into(),
                        detail: format!("{n_occupied} spins do not fit on {sites} sites"),
                    });
                }
                if !spacing.is_finite() || *spacing <= 0.0 {
                    return Err(SystemError::Invalid {
                        what: "lattice spacing".into(),
                        detail: format!("must be positive and finite, got {spacing}"),
                    });
                }
                Ok(())
            }
            Placement::Explicit { positions } => {
                if positions.is_empty() {
                    return Err(SystemError::Empty);
                }
                for (i, p) in positions.iter().enumerate() {
                    if p.iter().any(|c| !c.is_finite()) {
                        return Err(SystemError::Invalid {
                            what: format!("position {i}"),
                            detail: "coordinates must be finite".into(),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// How per-spin detunings are drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum DetuningModel {
    Normal { mean: f64, std_dev: f64 },
    Explicit(Vec<f64>),
}

/// Recipe for generating spin systems: spatial placement, detuning
/// distribution, and the dipolar coupling law.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySpec {
    pub placement: Placement,
    pub detunings: DetuningModel,
    pub dipolar: DipolarParams,
}

impl GeometrySpec {
    pub fn n_spins(&self) -> usize {
        self.placement.n_spins()
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        self.placement.validate()?;
        let n = self.placement.n_spins();
        match &self.detunings {
            DetuningModel::Normal { mean, std_dev } => {
                if !mean.is_finite() || !std_dev.is_finite() || *std_dev < 0.0 {
                    return Err(SystemError::Invalid {
                        what: "detuning distribution".into(),
                        detail: format!("mean {mean}, std_dev {std_dev}"),
                    });
                }
            }
            DetuningModel::Explicit(vals) => {
                if vals.len() != n {
                    return Err(SystemError::WrongLength {
                        what: "explicit detunings".into(),
                        expected: n,
                        got: vals.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Deterministically realize system number `index` from `master_seed`.
    ///
    /// Each realization gets an independent random stream, so results do not
    /// depend on evaluation order across a worker pool.
    pub fn realize(&self, master_seed: u64, index: u64) -> Result<SpinSystem, SystemError> {
        self.validate()?;
        let mut rng = derived_rng("geometry", master_seed, index);
        let positions = match &self.placement {
            Placement::BoxUniform { n_spins, side, min_separation } => {
                sample_box(&mut rng, *n_spins, *side, *min_separation)?
            }
            Placement::Lattice { dims, spacing, n_occupied } => {
                sample_lattice(&mut rng, *dims, *spacing, *n_occupied)
            }
            Placement::Explicit { positions } => positions.clone(),
        };
        let n = positions.len();
        let detunings = match &self.detunings {
            DetuningModel::Normal { mean, std_dev } => {
                let dist = Normal::new(*mean, *std_dev).map_err(|e| SystemError::Invalid {
                    what: "detuning distribution".into(),
                    detail: e.to_string(),
                })?;
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
            DetuningModel::Explicit(vals) => vals.clone(),
        };
        SpinSystem::from_positions(positions, detunings, &self.dipolar)
    }
}

/// Independent, reproducible random stream for (`tag`, `master_seed`,
/// `index`), via SHA-256 of the three.
pub fn derived_rng(tag: &str, master_seed: u64, index: u64) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    hasher.update(master_seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}

fn sample_box(
    rng: &mut ChaCha12Rng,
    n: usize,
    side: f64,
    min_sep: f64,
) -> Result<Vec<[f64; 3]>, SystemError> {
    const MAX_ATTEMPTS: usize = 100_000;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
    let mut attempts = 0;
    while positions.len() < n {
        if attempts >= MAX_ATTEMPTS {
            return Err(SystemError::PlacementFailed { requested: n, placed: positions.len(), attempts });
        }
        attempts += 1;
        let candidate = [
            rng.random::<f64>() * side,
            rng.random::<f64>() * side,
            rng.random::<f64>() * side,
        ];
        let ok = positions.iter().all(|p| {
            let d2: f64 = p.iter().zip(candidate.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 >= min_sep * min_sep
        });
        if ok {
            positions.push(candidate);
        }
    }
    Ok(positions)
}

fn sample_lattice(rng: &mut ChaCha12Rng, dims: [usize; 3], spacing: f64, n: usize) -> Vec<[f64; 3]> {
    let mut sites: Vec<usize> = (0..dims[0] * dims[1] * dims[2]).collect();
    // partial Fisher-Yates: the first n entries become the chosen sites
    for k in 0..n {
        let pick = k + rng.random_range(0..(sites.len() - k) as u64) as usize;
        sites.swap(k, pick);
    }
    let mut chosen: Vec<usize> = sites[..n].to_vec();
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|s| {
            let x = s / (dims[1] * dims[2]);
            let y = (s / dims[2]) % dims[1];
            let z = s % dims[2];
            [x as f64 * spacing, y as f64 * spacing, z as f64 * spacing]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn pair_hamiltonian_matrix() {
        // Two spins, detunings 1 and 2, coupling 3. Worked out by hand in
        // the up/up, up/down, down/up, down/down basis.
        let sys = SpinSystem::new(vec![1.0, 2.0], vec![3.0]).unwrap();
        let h = sys.hamiltonian_numeric().to_dense().unwrap();
        let expect = [
            [3.0, 0.0, 0.0, 0.0],
            [0.0, -2.0, -1.5, 0.0],
            [0.0, -1.5, -1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ];
        for (r, row) in expect.iter().enumerate() {
            for (c, want) in row.iter().enumerate() {
                let got = h.entry(r, c);
                assert!(
                    (got - Complex64::new(*want, 0.0)).norm() < 1e-14,
                    "entry ({r},{c}) = {got}"
                );
            }
        }
    }

    #[test]
    fn hamiltonian_conserves_collective_z_exactly() {
        // The symbolic commutator [H_in, Iz,total] must vanish identically
        // in the free parameters, while the transverse components must not.
        let h = SpinSystem::hamiltonian_symbolic(3);
        let iz_tot = SymbolicOp::total_spin(Axis::Z, 3);
        assert!(h.commutator(&iz_tot).unwrap().is_zero());
        let ix_tot = SymbolicOp::total_spin(Axis::X, 3);
        assert!(!h.commutator(&ix_tot).unwrap().is_zero());
    }

    #[test]
    fn exact_and_numeric_hamiltonians_agree() {
        let sys = SpinSystem::new(vec![0.3, -0.7, 0.1], vec![0.5, -0.25, 0.125]).unwrap();
        let exact = sys.hamiltonian_exact().to_numeric().unwrap();
        let numeric = sys.hamiltonian_numeric();
        assert!(exact.coeff_distance(&numeric).unwrap() == 0.0);
    }

    #[test]
    fn dipolar_angular_factor() {
        let p = DipolarParams::new(0.25, AnglePower::Two, [0.0, 0.0, 1.0]).unwrap();
        // collinear pair at unit distance: 0.25 * (1 - 3) = -0.5
        let a = p.coupling([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((a - (-0.5)).abs() < 1e-15);
        // perpendicular pair at distance 2: 0.25 * 1 / 8
        let b = p.coupling([0.0, 0.0, 0.0], [2.0, 0.0, 0.0]).unwrap();
        assert!((b - 0.03125).abs() < 1e-15);

        // odd power distinguishes parallel from antiparallel
        let p1 = DipolarParams::new(0.25, AnglePower::One, [0.0, 0.0, 1.0]).unwrap();
        let up = p1.coupling([0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        let down = p1.coupling([0.0; 3], [0.0, 0.0, -1.0]).unwrap();
        assert!((up - 0.25 * (1.0 - 3.0)).abs() < 1e-15);
        assert!((down - 0.25 * (1.0 + 3.0)).abs() < 1e-15);
        // even power does not
        let up2 = p.coupling([0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        let down2 = p.coupling([0.0; 3], [0.0, 0.0, -1.0]).unwrap();
        assert_eq!(up2, down2);
    }

    #[test]
    fn coupling_falls_off_as_inverse_cube() {
        let p = DipolarParams::reference();
        let near = p.coupling([0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        let far = p.coupling([0.0; 3], [0.0, 0.0, 2.0]).unwrap();
        assert!((near / far - 8.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_is_rotation_invariant() {
        // rotate pair vector and field axis together: same coupling
        let base = DipolarParams::new(1.0, AnglePower::Two, [0.0, 0.0, 1.0]).unwrap();
        let a0 = base.coupling([0.0; 3], [0.4, 0.0, 0.9]).unwrap();
        // rotate everything by 90 degrees about y: z -> x, x -> -z
        let rot = DipolarParams::new(1.0, AnglePower::Two, [1.0, 0.0, 0.0]).unwrap();
        let a1 = rot.coupling([0.0; 3], [0.9, 0.0, -0.4]).unwrap();
        assert!((a0 - a1).abs() < 1e-12);
    }

    #[test]
    fn coincident_spins_rejected() {
        let p = DipolarParams::reference();
        assert!(p.coupling([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]).is_err());
    }

    fn sample_geometry() -> GeometrySpec {
        GeometrySpec {
            placement: Placement::BoxUniform { n_spins: 4, side: 2.0, min_separation: 0.5 },
            detunings: DetuningModel::Normal { mean: 0.0, std_dev: 1.0 },
            dipolar: DipolarParams::reference(),
        }
    }

    #[test]
    fn realization_is_deterministic_per_index() {
        let g = sample_geometry();
        let a = g.realize(42, 0).unwrap();
        let b = g.realize(42, 0).unwrap();
        assert_eq!(a, b);
        let c = g.realize(42, 1).unwrap();
        assert_ne!(a, c);
        let d = g.realize(43, 0).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn box_placement_respects_min_separation() {
        let g = GeometrySpec {
            placement: Placement::BoxUniform { n_spins: 6, side: 3.0, min_separation: 0.8 },
            detunings: DetuningModel::Normal { mean: 0.0, std_dev: 0.5 },
            dipolar: DipolarParams::reference(),
        };
        let sys = g.realize(7, 3).unwrap();
        let pos = sys.positions().unwrap();
        for i in 0..pos.len() {
            for j in (i + 1)..pos.len() {
                let d2: f64 = pos[i]
                    .iter()
                    .zip(pos[j].iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                assert!(d2.sqrt() >= 0.8);
            }
        }
    }

    #[test]
    fn impossible_box_packing_fails_cleanly() {
        let g = GeometrySpec {
            placement: Placement::BoxUniform { n_spins: 30, side: 1.0, min_separation: 0.9 },
            detunings: DetuningModel::Normal { mean: 0.0, std_dev: 1.0 },
            dipolar: DipolarParams::reference(),
        };
        assert!(matches!(g.realize(1, 0), Err(SystemError::PlacementFailed { .. })));
    }

    #[test]
    fn lattice_occupancy() {
        let g = GeometrySpec {
            placement: Placement::Lattice { dims: [2, 2, 2], spacing: 1.5, n_occupied: 5 },
            detunings: DetuningModel::Explicit(vec![0.1; 5]),
            dipolar: DipolarParams::reference(),
        };
        let sys = g.realize(9, 0).unwrap();
        assert_eq!(sys.n_spins(), 5);
        // all positions distinct lattice points
        let pos = sys.positions().unwrap();
        for i in 0..pos.len() {
            for j in (i + 1)..pos.len() {
                assert_ne!(pos[i], pos[j]);
            }
        }
        // overfull lattice rejected
        let bad = GeometrySpec {
            placement: Placement::Lattice { dims: [1, 1, 2], spacing: 1.0, n_occupied: 3 },
            detunings: DetuningModel::Normal { mean: 0.0, std_dev: 1.0 },
            dipolar: DipolarParams::reference(),
        };
        assert!(bad.realize(1, 0).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let g = sample_geometry();
        let sys = g.realize(123, 4).unwrap();
        let text = sys.to_text();
        let back = SpinSystem::from_text(&text).unwrap();
        assert_eq!(sys, back);
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let err = SpinSystem::from_text("spins 2\ndetuning 0 0.5\nbogus 1 2\n").unwrap_err();
        match err {
            SystemError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn explicit_detuning_length_checked() {
        let g = GeometrySpec {
            placement: Placement::Explicit {
                positions: vec![[0.0; 3], [1.0, 0.0, 0.0]],
            },
            detunings: DetuningModel::Explicit(vec![0.1, 0.2, 0.3]),
            dipolar: DipolarParams::reference(),
        };
        assert!(matches!(g.realize(0, 0), Err(SystemError::WrongLength { .. })));
    }
}

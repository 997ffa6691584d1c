//! Measurements, observed counts and the JSON dataset format.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::state::{
    pauli_matrices, trace_product, CMatrix, Complex64, DensityMatrix, Effect,
};
use crate::{Error, Result};

/// Entrywise tolerance on `Σ Eₖ = I`.
pub const COMPLETENESS_TOL: f64 = 1e-8;

/// A named POVM: effects that sum to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    name: String,
    effects: Vec<Effect>,
}

impl Povm {
    pub fn new(name: impl Into<String>, effects: Vec<Effect>) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidSetting {
            name: name.clone(),
            reason,
        };
        let first = effects
            .first()
            .ok_or_else(|| invalid("no effects".into()))?;
        let d = first.dim();
        let mut sum = CMatrix::zeros(d, d);
        for e in &effects {
            if e.dim() != d {
                return Err(invalid(format!(
                    "effects have mixed dimensions {d} and {}",
                    e.dim()
                )));
            }
            sum += e.matrix();
        }
        let id = CMatrix::identity(d, d);
        let worst = (sum - id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if worst > COMPLETENESS_TOL {
            return Err(invalid(format!(
                "effects do not sum to the identity (max deviation {worst:e})"
            )));
        }
        Ok(Self { name, effects })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    /// Two-outcome projective measurement of a Pauli-like observable with
    /// eigenvalues ±1: effects `(I ± σ)/2`.
    fn plus_minus(name: &str, sigma: &CMatrix) -> Self {
        let id = CMatrix::identity(2, 2);
        let plus = Effect::new((&id + sigma).scale(0.5)).expect("projector");
        let minus = Effect::new((&id - sigma).scale(0.5)).expect("projector");
        Self::new(name, vec![plus, minus]).expect("complete")
    }
}

/// σx, σy and σz projective measurements on a qubit, in that order. Each
/// has effects `(E₊, E₋)`.
pub fn pauli_settings() -> Vec<Povm> {
    let [x, y, z] = pauli_matrices();
    vec![
        Povm::plus_minus("sigma_x", &x),
        Povm::plus_minus("sigma_y", &y),
        Povm::plus_minus("sigma_z", &z),
    ]
}

/// Look up one Pauli setting by short name (`x`, `y`, `z`).
pub fn pauli_setting(axis: &str) -> Result<Povm> {
    let idx = match axis.trim().to_ascii_lowercase().as_str() {
        "x" | "sx" | "sigma_x" => 0,
        "y" | "sy" | "sigma_y" => 1,
        "z" | "sz" | "sigma_z" => 2,
        other => return Err(Error::arg("settings", format!("unknown Pauli axis `{other}`"))),
    };
    Ok(pauli_settings().swap_remove(idx))
}

/// Born-rule probabilities `pₖ = Tr(Eₖ ρ)`, clamped to `[0, 1]`.
pub fn born_probabilities(rho: &DensityMatrix, povm: &Povm) -> Result<Vec<f64>> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: rho.dim(),
        });
    }
    Ok(povm
        .effects()
        .iter()
        .map(|e| trace_product(e.matrix(), rho.matrix()).clamp(0.0, 1.0))
        .collect())
}

/// A POVM together with the number of times each outcome was observed.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    povm: Povm,
    counts: Vec<u64>,
}

impl MeasurementSetting {
    pub fn new(povm: Povm, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != povm.outcomes() {
            return Err(Error::InvalidSetting {
                name: povm.name().to_string(),
                reason: format!(
                    "{} counts for {} effects",
                    counts.len(),
                    povm.outcomes()
                ),
            });
        }
        Ok(Self { povm, counts })
    }

    pub fn name(&self) -> &str {
        self.povm.name()
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn effects(&self) -> &[Effect] {
        self.povm.effects()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// The observed data: a dimension and a list of measurement settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyDataset {
    dim: usize,
    settings: Vec<MeasurementSetting>,
}

impl TomographyDataset {
    pub fn new(dim: usize, settings: Vec<MeasurementSetting>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDataset(format!("dimension {dim} < 2")));
        }
        if settings.is_empty() {
            return Err(Error::InvalidDataset("no measurement settings".into()));
        }
        for s in &settings {
            if s.povm().dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.povm().dim(),
                });
            }
        }
        Ok(Self { dim, settings })
    }

    /// Qubit data from σx, σy, σz: one `(plus, minus)` count pair per axis.
    pub fn pauli_counts(counts: [(u64, u64); 3]) -> Self {
        let settings = pauli_settings()
            .into_iter()
            .zip(counts)
            .map(|(p, (a, b))| MeasurementSetting::new(p, vec![a, b]).expect("two outcomes"))
            .collect();
        Self::new(2, settings).expect("valid qubit dataset")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> &[MeasurementSetting] {
        &self.settings
    }

    /// Total number of copies `N`, the sum of all counts.
    pub fn total_copies(&self) -> u64 {
        self.settings.iter().map(|s| s.shots()).sum()
    }

    /// All counts concatenated in setting order.
    pub fn flat_counts(&self) -> Vec<u64> {
        self.settings
            .iter()
            .flat_map(|s| s.counts().iter().copied())
            .collect()
    }

    pub(crate) fn require_copies(&self) -> Result<()> {
        if self.total_copies() == 0 {
            Err(Error::InvalidDataset("dataset has no observed events (N = 0)".into()))
        } else {
            Ok(())
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DatasetFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_dataset()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&DatasetFile::from(self)).expect("serializable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json_string();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// JSON matrix: rows of `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("matrix must be square and non-empty".into()));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Parse(format!("non-finite entry at ({i}, {j})")));
            }
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    dimension: usize,
    settings: Vec<SettingFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingFile {
    name: String,
    effects: Vec<JsonMatrix>,
    counts: Vec<u64>,
}

impl DatasetFile {
    fn into_dataset(self) -> Result<TomographyDataset> {
        let settings = self
            .settings
            .into_iter()
            .map(|s| {
                let effects = s
                    .effects
                    .iter()
                    .map(|m| matrix_from_json(m).and_then(Effect::new))
                    .collect::<Result<Vec<_>>>()?;
                MeasurementSetting::new(Povm::new(s.name, effects)?, s.counts)
            })
            .collect::<Result<Vec<_>>>()?;
        TomographyDataset::new(self.dimension, settings)
    }
}

impl From<&TomographyDataset> for DatasetFile {
    fn from(d: &TomographyDataset) -> Self {
        Self {
            dimension: d.dim(),
            settings: d
                .settings()
                .iter()
                .map(|s| SettingFile {
                    name: s.name().to_string(),
                    effects: s.effects().iter().map(|e| matrix_to_json(e.matrix())).collect(),
                    counts: s.counts().to_vec(),
                })
                .collect(),
        }
    }
}

/// One multinomial draw of `shots` outcomes with probabilities `probs`.
pub(crate) fn sample_multinomial<R: rand::Rng>(rng: &mut R, shots: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let last = probs.len() - 1;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == last {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let n = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        counts[k] = n;
        remaining -= n;
        mass -= p;
    }
    counts
}

/// Simulate independent measurements of `rho`: for each `(povm, shots)`
/// pair draw multinomial counts from the Born probabilities. Setting `i`
/// uses stream `i` of a ChaCha8 generator keyed by `seed`, so results depend
/// only on the seed and the plan.
pub fn simulate_dataset(
    rho: &DensityMatrix,
    plan: &[(Povm, u64)],
    seed: u64,
) -> Result<TomographyDataset> {
    let rho = DensityMatrix::new(rho.matrix().clone())?;
    let settings = plan
        .iter()
        .enumerate()
        .map(|(i, (povm, shots))| {
            let probs = born_probabilities(&rho, povm)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            MeasurementSetting::new(povm.clone(), sample_multinomial(&mut rng, *shots, &probs))
        })
        .collect::<Result<Vec<_>>>()?;
    TomographyDataset::new(rho.dim(), settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{BlochVector, DensityMatrix};

    fn fig1() -> TomographyDataset {
        TomographyDataset::pauli_counts([(7, 13), (9, 11), (3, 17)])
    }

    #[test]
    fn pauli_effects() {
        let s = pauli_settings();
        assert_eq!(s.len(), 3);
        let z = &s[2];
        let e0 = z.effects()[0].matrix();
        let e1 = z.effects()[1].matrix();
        assert_eq!(e0[(0, 0)].re, 1.0);
        assert_eq!(e0[(1, 1)].re, 0.0);
        assert_eq!(e1[(0, 0)].re, 0.0);
        assert_eq!(e1[(1, 1)].re, 1.0);
        for povm in &s {
            let sum = povm.effects()[0].matrix() + povm.effects()[1].matrix();
            assert!((sum - CMatrix::identity(2, 2)).norm() < 1e-15);
            for e in povm.effects() {
                // rank-1 projector: E² = E, Tr E = 1
                let m = e.matrix();
                assert!((m * m - m).norm() < 1e-14);
                assert!((m.trace().re - 1.0).abs() < 1e-14);
            }
        }
        let plus_x = DensityMatrix::from_bloch(&BlochVector::new(vec![1.0, 0.0, 0.0])).unwrap();
        let p = born_probabilities(&plus_x, &s[0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn born_examples() {
        let z = pauli_setting("z").unwrap();
        let p = born_probabilities(&DensityMatrix::maximally_mixed(2), &z).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let zero = DensityMatrix::from_bloch(&BlochVector::new(vec![0.0, 0.0, 1.0])).unwrap();
        assert_eq!(born_probabilities(&zero, &z).unwrap(), vec![1.0, 0.0]);
        let r = DensityMatrix::from_bloch(&BlochVector::new(vec![-0.3, -0.1, -0.7])).unwrap();
        let p = born_probabilities(&r, &z).unwrap();
        assert!((p[0] - 0.15).abs() < 1e-12 && (p[1] - 0.85).abs() < 1e-12);
        assert!(born_probabilities(&DensityMatrix::maximally_mixed(3), &z).is_err());
    }

    #[test]
    fn born_is_affine() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let settings = pauli_settings();
        let random_state = |rng: &mut ChaCha8Rng| loop {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            if let Ok(s) = DensityMatrix::from_bloch(&BlochVector::new(v)) {
                break s;
            }
        };
        for _ in 0..100 {
            let a = random_state(&mut rng);
            let b = random_state(&mut rng);
            let w: f64 = rng.random();
            let m = a.mix(&b, w).unwrap();
            for povm in &settings {
                let pa = born_probabilities(&a, povm).unwrap();
                let pb = born_probabilities(&b, povm).unwrap();
                let pm = born_probabilities(&m, povm).unwrap();
                for k in 0..2 {
                    assert!((pm[k] - (w * pa[k] + (1.0 - w) * pb[k])).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn completeness_enforced() {
        let half = Effect::new(CMatrix::identity(2, 2).scale(0.5)).unwrap();
        assert!(Povm::new("bad", vec![half.clone()]).is_err());
        assert!(Povm::new("ok", vec![half.clone(), half]).is_ok());
        assert!(Povm::new("empty", vec![]).is_err());
        let z = pauli_setting("z").unwrap();
        assert!(MeasurementSetting::new(z, vec![1, 2, 3]).is_err());
    }

    #[test]
    fn dataset_totals() {
        let d = fig1();
        assert_eq!(d.total_copies(), 60);
        assert_eq!(d.flat_counts(), vec![7, 13, 9, 11, 3, 17]);
        assert!(TomographyDataset::new(2, vec![]).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let d = fig1();
        let text = d.to_json_string();
        assert_eq!(TomographyDataset::from_json_str(&text).unwrap(), d);

        let bad_counts = text.replacen("7,", "-7,", 1);
        assert!(TomographyDataset::from_json_str(&bad_counts).is_err());
        let not_square = r#"{"dimension":2,"settings":[{"name":"a","effects":[[[[1,0]]]],"counts":[1]}]}"#;
        assert!(TomographyDataset::from_json_str(not_square).is_err());
        let overflow = r#"{"dimension":2,"settings":[{"name":"a","effects":[[[[1e999,0],[0,0]],[[0,0],[0,0]]]],"counts":[1]}]}"#;
        assert!(TomographyDataset::from_json_str(overflow).is_err());
        let incomplete = r#"{"dimension":2,"settings":[{"name":"a","effects":[[[[1,0],[0,0]],[[0,0],[0,0]]]],"counts":[1]}]}"#;
        assert!(TomographyDataset::from_json_str(incomplete).is_err());
        let empty = r#"{"dimension":2,"settings":[]}"#;
        assert!(TomographyDataset::from_json_str(empty).is_err());
    }

    #[test]
    fn simulate_pure_eigenstate() {
        let zero = DensityMatrix::from_bloch(&BlochVector::new(vec![0.0, 0.0, 1.0])).unwrap();
        let z = pauli_setting("z").unwrap();
        for seed in 0..20 {
            let d = simulate_dataset(&zero, &[(z.clone(), 20)], seed).unwrap();
            assert_eq!(d.settings()[0].counts(), &[20, 0]);
        }
    }

    #[test]
    fn simulate_is_deterministic() {
        let mixed = DensityMatrix::maximally_mixed(2);
        let plan: Vec<_> = pauli_settings().into_iter().map(|p| (p, 20)).collect();
        let a = simulate_dataset(&mixed, &plan, 42).unwrap();
        let b = simulate_dataset(&mixed, &plan, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.settings().iter().all(|s| s.shots() == 20));
        let c = simulate_dataset(&mixed, &plan, 43).unwrap();
        assert_ne!(a.flat_counts(), c.flat_counts());
    }

    #[test]
    fn simulate_concentrates() {
        let mixed = DensityMatrix::maximally_mixed(2);
        let z = pauli_setting("z").unwrap();
        for seed in 0..100 {
            let d = simulate_dataset(&mixed, &[(z.clone(), 100_000)], seed).unwrap();
            let f = d.settings()[0].counts()[0] as f64 / 1e5;
            assert!((f - 0.5).abs() < 0.005, "seed {seed}: {f}");
        }
    }

    #[test]
    fn simulate_rejects_unphysical() {
        let z = pauli_setting("z").unwrap();
        let bad = DensityMatrix::from_trusted(CMatrix::identity(2, 2));
        assert!(simulate_dataset(&bad, &[(z, 5)], 0).is_err());
    }
}

//! Fitting functional models of the control dependence f -> H(f) to a table
//! of identified rotation axes, and ranking candidate models.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocols::HamiltonianEstimate;

/// A Cartesian component of the rotation-axis vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
            Axis::Z => write!(f, "z"),
        }
    }
}

/// Identified rotation-axis vectors d_k paired with the control vectors
/// f^(k) that produced them.
#[derive(Clone, Debug, Serialize)]
pub struct ControlDataset {
    controls: Vec<Vec<f64>>,
    axes: Vec<[f64; 3]>,
    /// Rows whose azimuth rests on an unresolved branch choice; refitting on
    /// the alternate branch means rebuilding the dataset with that choice.
    ambiguous: Vec<bool>,
}

impl ControlDataset {
    pub fn new(controls: Vec<Vec<f64>>, axes: Vec<[f64; 3]>) -> Result<Self> {
        if controls.len() != axes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} control vectors for {} axis vectors",
                controls.len(),
                axes.len()
            )));
        }
        if controls.is_empty() {
            return Err(Error::DatasetTooSmall("dataset has no rows".into()));
        }
        let arity = controls[0].len();
        for (k, f) in controls.iter().enumerate() {
            if f.len() != arity {
                return Err(Error::ControlArity { got: f.len(), expected: arity });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidTrace(format!("control vector {k} is not finite")));
            }
        }
        for (k, d) in axes.iter().enumerate() {
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidTrace(format!("axis vector {k} is not finite")));
            }
        }
        let ambiguous = vec![false; controls.len()];
        Ok(Self { controls, axes, ambiguous })
    }

    /// Converts identified axis parameters into Cartesian rows
    /// d = omega (sin t cos p, sin t sin p, cos t); estimates without an
    /// azimuth use p = 0 and are flagged ambiguous, as are estimates whose
    /// azimuth branch was not resolved.
    pub fn from_estimates(
        controls: &[Vec<f64>],
        estimates: &[HamiltonianEstimate],
    ) -> Result<Self> {
        if controls.len() != estimates.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} control vectors for {} estimates",
                controls.len(),
                estimates.len()
            )));
        }
        let mut axes = Vec::with_capacity(estimates.len());
        let mut ambiguous = Vec::with_capacity(estimates.len());
        for (k, e) in estimates.iter().enumerate() {
            if e.omega_undetermined {
                return Err(Error::OmegaUndetermined(format!(
                    "row {k} carries no oscillation; drop that setting before fitting"
                )));
            }
            let phi = e.phi_hat.unwrap_or(0.0);
            axes.push([
                e.omega_hat * e.theta_hat.sin() * phi.cos(),
                e.omega_hat * e.theta_hat.sin() * phi.sin(),
                e.omega_hat * e.theta_hat.cos(),
            ]);
            ambiguous.push(e.phi_hat.is_none() || e.phi_candidates.len() > 1);
        }
        let mut data = Self::new(controls.to_vec(), axes)?;
        data.ambiguous = ambiguous;
        Ok(data)
    }

    /// Number of rows K.
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Number of control components M.
    pub fn arity(&self) -> usize {
        self.controls[0].len()
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    pub fn axes(&self) -> &[[f64; 3]] {
        &self.axes
    }

    pub fn ambiguous(&self) -> &[bool] {
        &self.ambiguous
    }

    pub fn component(&self, axis: Axis) -> Vec<f64> {
        self.axes.iter().map(|d| d[axis.index()]).collect()
    }

    /// CSV with one row per setting: control components, then d_x, d_y, d_z.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.arity() == 1 {
            out.push_str("f,d_x,d_y,d_z\n");
        } else {
            for m in 0..self.arity() {
                out.push_str(&format!("f{m},"));
            }
            out.push_str("d_x,d_y,d_z\n");
        }
        for (f, d) in self.controls.iter().zip(&self.axes) {
            for v in f {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{},{},{}\n", d[0], d[1], d[2]));
        }
        out
    }

    /// Parses the format written by [`ControlDataset::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| {
            Error::DatasetTooSmall("csv has no header".into())
        })?;
        let columns = header.split(',').count();
        if columns < 4 {
            return Err(Error::InvalidTrace(format!(
                "csv header {header:?} needs control columns plus d_x,d_y,d_z"
            )));
        }
        let arity = columns - 3;
        let mut controls = Vec::new();
        let mut axes = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidTrace(format!("csv row {}: bad number {s:?}", i + 2))
                    })
                })
                .collect::<Result<_>>()?;
            if fields.len() != columns {
                return Err(Error::InvalidTrace(format!(
                    "csv row {} has {} fields, expected {columns}",
                    i + 2,
                    fields.len()
                )));
            }
            controls.push(fields[..arity].to_vec());
            axes.push([fields[arity], fields[arity + 1], fields[arity + 2]]);
        }
        Self::new(controls, axes)
    }
}

/// Affine model d(f) = intercept + sum_m f_m slopes[m], fitted entrywise.
#[derive(Clone, Debug, Serialize)]
pub struct LinearControlModel {
    pub intercept: [f64; 3],
    pub slopes: Vec<[f64; 3]>,
    /// Root of the summed squared residual norms.
    pub delta: f64,
}

impl LinearControlModel {
    pub fn predict(&self, f: &[f64]) -> [f64; 3] {
        let mut d = self.intercept;
        for (fm, slope) in f.iter().zip(&self.slopes) {
            for i in 0..3 {
                d[i] += fm * slope[i];
            }
        }
        d
    }
}

fn least_squares(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = design.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    if !(largest > 0.0) || smallest < 1e-10 * largest {
        let v_t = svd.v_t.as_ref().expect("requested");
        let null_row = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let direction: Vec<String> =
            v_t.row(null_row).iter().map(|v| format!("{v:.3}")).collect();
        return Err(Error::RankDeficient(format!(
            "dataset does not resolve the coefficient direction [{}]",
            direction.join(", ")
        )));
    }
    svd.solve(rhs, 1e-12).map_err(|e| Error::RankDeficient(e.to_string()))
}

/// Fits the best affine model of the axis vector as a function of the
/// control, one Cartesian component at a time over a shared design matrix.
pub fn fit_linear_model(data: &ControlDataset) -> Result<LinearControlModel> {
    let k = data.len();
    let m = data.arity();
    if k < m + 1 {
        return Err(Error::DatasetTooSmall(format!(
            "{k} rows cannot determine {} linear coefficients",
            m + 1
        )));
    }
    let design = DMatrix::from_fn(k, m + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            data.controls[r][c - 1]
        }
    });
    let mut intercept = [0.0f64; 3];
    let mut slopes = vec![[0.0f64; 3]; m];
    let mut rss = 0.0;
    for axis in Axis::ALL {
        let rhs = DVector::from_vec(data.component(axis));
        let coeffs = least_squares(&design, &rhs)?;
        intercept[axis.index()] = coeffs[0];
        for (mm, slope) in slopes.iter_mut().enumerate() {
            slope[axis.index()] = coeffs[mm + 1];
        }
        rss += (&design * &coeffs - &rhs).norm_squared();
    }
    Ok(LinearControlModel { intercept, slopes, delta: rss.sqrt() })
}

/// Univariate polynomial fit of one axis component against a scalar control.
#[derive(Clone, Debug, Serialize)]
pub struct PolynomialComponentFit {
    pub component: Axis,
    pub degree: usize,
    /// Coefficients in ascending powers of f.
    pub coefficients: Vec<f64>,
    /// Root of the summed squared residuals of this component.
    pub residual: f64,
}

impl PolynomialComponentFit {
    pub fn predict(&self, f: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * f + c)
    }
}

/// Least-squares polynomial in a single scalar control for one component.
pub fn fit_polynomial_component(
    data: &ControlDataset,
    component: Axis,
    degree: usize,
) -> Result<PolynomialComponentFit> {
    if data.arity() != 1 {
        return Err(Error::ControlArityForFit(data.arity()));
    }
    let k = data.len();
    if degree + 1 > k {
        return Err(Error::DegreeTooHigh { degree, rows: k });
    }
    let design = DMatrix::from_fn(k, degree + 1, |r, c| data.controls[r][0].powi(c as i32));
    let rhs = DVector::from_vec(data.component(component));
    let coeffs = least_squares(&design, &rhs)?;
    let residual = (&design * &coeffs - &rhs).norm();
    Ok(PolynomialComponentFit {
        component,
        degree,
        coefficients: coeffs.iter().copied().collect(),
        residual,
    })
}

/// A candidate functional form for the control dependence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "degree")]
pub enum ModelSpec {
    /// Affine in every control component.
    Linear,
    /// Each axis component an independent univariate polynomial (scalar
    /// control only).
    Polynomial(usize),
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelSpec::Linear => write!(f, "linear"),
            ModelSpec::Polynomial(d) => write!(f, "polynomial(degree {d})"),
        }
    }
}

/// One fitted candidate with its raw and adjusted quality measures.
#[derive(Clone, Debug, Serialize)]
pub struct ModelScore {
    pub spec: ModelSpec,
    /// Raw residual norm over all rows and components.
    pub delta: f64,
    /// Residual sum of squares divided by (3K - parameters).
    pub adjusted_score: f64,
    pub parameters: usize,
    /// Residual norm of each row under the fitted model.
    pub per_point_residuals: Vec<f64>,
}

/// Candidates ordered from best (lowest adjusted score) to worst.
#[derive(Clone, Debug, Serialize)]
pub struct ModelComparison {
    pub ranked: Vec<ModelScore>,
}

impl ModelComparison {
    pub fn best(&self) -> &ModelScore {
        &self.ranked[0]
    }
}

fn score_model(data: &ControlDataset, spec: ModelSpec) -> Result<ModelScore> {
    let k = data.len();
    let (parameters, predictions): (usize, Vec<[f64; 3]>) = match spec {
        ModelSpec::Linear => {
            let model = fit_linear_model(data)?;
            let preds = data.controls.iter().map(|f| model.predict(f)).collect();
            (3 * (data.arity() + 1), preds)
        }
        ModelSpec::Polynomial(degree) => {
            let fits: Vec<PolynomialComponentFit> = Axis::ALL
                .iter()
                .map(|&a| fit_polynomial_component(data, a, degree))
                .collect::<Result<_>>()?;
            let preds = data
                .controls
                .iter()
                .map(|f| [fits[0].predict(f[0]), fits[1].predict(f[0]), fits[2].predict(f[0])])
                .collect();
            (3 * (degree + 1), preds)
        }
    };
    if parameters >= 3 * k {
        return Err(Error::DegreeTooHigh { degree: parameters, rows: 3 * k });
    }
    let per_point_residuals: Vec<f64> = predictions
        .iter()
        .zip(&data.axes)
        .map(|(p, d)| {
            ((p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2) + (p[2] - d[2]).powi(2)).sqrt()
        })
        .collect();
    let rss: f64 = per_point_residuals.iter().map(|r| r * r).sum();
    Ok(ModelScore {
        spec,
        delta: rss.sqrt(),
        adjusted_score: rss / (3 * k - parameters) as f64,
        parameters,
        per_point_residuals,
    })
}

/// Fits every candidate and ranks them by residual per remaining degree of
/// freedom, so extra parameters must earn their keep.
pub fn compare_models(data: &ControlDataset, specs: &[ModelSpec]) -> Result<ModelComparison> {
    if specs.is_empty() {
        return Err(Error::DatasetTooSmall("no candidate models to compare".into()));
    }
    let mut ranked: Vec<ModelScore> =
        specs.iter().map(|&s| score_model(data, s)).collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.adjusted_score.total_cmp(&b.adjusted_score));
    Ok(ModelComparison { ranked })
}

//! Request types and payload builders shared by the CLI and the HTTP service.
//!
//! Every entry point returns the exact bytes that are written to stdout or
//! sent as a response body, so both front ends stay byte-identical.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use refstd_core::format::to_json_bytes;
use refstd_core::lcm::EtaSource;
use refstd_core::population::HalfPlane;
use refstd_core::sweep::{
    self, find_crossovers, sweep_with, ExportFormat, OtherCovariance, Quantity, SweepAxis,
    SweepOptions,
};
use refstd_core::verify::VerifyReport;
use refstd_core::{
    admissible_bounds, validate, BoundsContext, Error, MethodId, MethodResult, PopulationSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    /// Path of the offending field, such as `spec.xi` or `axis.points`.
    pub detail: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>, detail: impl Into<String>) -> Self {
        ApiError {
            code: "BAD_REQUEST".into(),
            message: message.into(),
            detail: detail.into(),
        }
    }

    pub fn http_status(&self) -> u16 {
        if self.code == "OUT_OF_BOUNDS" {
            422
        } else {
            400
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self.code.as_str() {
            "DEGENERATE_REFERENCE" | "UNDEFINED_ESTIMATOR" | "NO_ROOT" => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        to_json_bytes(self)
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let detail = match &err {
            Error::InvalidSpec(report) => report
                .violations
                .iter()
                .map(|v| format!("spec.{}", v.field))
                .collect::<Vec<_>>()
                .join(","),
            Error::DegenerateReference { method, .. } | Error::UnsupportedMethod(method) => {
                format!("methods.{method}")
            }
            Error::EmptyRegion(_) => "spec".into(),
            Error::InvalidAxis(_) => "axis".into(),
            Error::Format(_) => "body".into(),
            Error::UndefinedEstimator(_) | Error::NoRoot | Error::Precondition(_) => String::new(),
        };
        ApiError {
            code: err.code().into(),
            message: err.to_string(),
            detail,
        }
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

/// Parse a JSON request body, rejecting unknown fields.
pub fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let detail = if path == "." {
            "body".to_string()
        } else {
            path
        };
        ApiError::bad_request(e.into_inner().to_string(), detail)
    })
}

/// Resolve method tags. `None` means the four comparative methods and a
/// single `all` selects every method.
pub fn parse_methods(tags: Option<&[String]>) -> ApiResult<Vec<MethodId>> {
    let Some(tags) = tags else {
        return Ok(MethodId::COMPARATIVE.to_vec());
    };
    if tags.is_empty() {
        return Err(ApiError::bad_request("no methods selected", "methods"));
    }
    if tags.len() == 1 && tags[0].trim().eq_ignore_ascii_case("all") {
        return Ok(MethodId::ALL.to_vec());
    }
    let mut methods = Vec::with_capacity(tags.len());
    for (i, tag) in tags.iter().enumerate() {
        let m: MethodId = tag.parse().map_err(|_| {
            ApiError::bad_request(format!("unknown method '{tag}'"), format!("methods[{i}]"))
        })?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    Ok(methods)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeRequest {
    pub spec: PopulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub eta_source: EtaSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ComputeEntry {
    Ok(MethodResult),
    Err { method: MethodId, error: ApiError },
}

pub struct ComputeOutput {
    pub body: Vec<u8>,
    /// Worst per-method failure, if any method could not be evaluated.
    pub method_error: Option<ApiError>,
}

impl ComputeOutput {
    pub fn exit_code(&self) -> i32 {
        self.method_error.as_ref().map_or(0, ApiError::exit_code)
    }
}

/// Evaluate each requested method. An invalid spec fails the whole request;
/// a method that cannot be evaluated is reported in place.
pub fn compute(req: &ComputeRequest) -> ApiResult<ComputeOutput> {
    validate(&req.spec).into_result()?;
    let methods = parse_methods(req.methods.as_deref())?;
    let options = SweepOptions {
        eta_source: req.eta_source,
        ..Default::default()
    };
    let mut method_error: Option<ApiError> = None;
    let entries: Vec<ComputeEntry> = methods
        .into_iter()
        .map(
            |method| match sweep::evaluate_point(&req.spec, method, &options) {
                Ok(r) => ComputeEntry::Ok(r),
                Err(e) => {
                    let error = ApiError::from(e);
                    if method_error
                        .as_ref()
                        .is_none_or(|w| error.exit_code() > w.exit_code())
                    {
                        method_error = Some(error.clone());
                    }
                    ComputeEntry::Err { method, error }
                }
            },
        )
        .collect();
    Ok(ComputeOutput {
        body: to_json_bytes(&entries),
        method_error,
    })
}

fn default_format() -> ExportFormat {
    ExportFormat::Json
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    pub spec: PopulationSpec,
    pub axis: SweepAxis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(default = "default_format")]
    pub format: ExportFormat,
    #[serde(default)]
    pub other_covariance: OtherCovariance,
    #[serde(default)]
    pub eta_source: EtaSource,
}

impl SweepRequest {
    fn options(&self) -> SweepOptions {
        SweepOptions {
            other_covariance: self.other_covariance,
            eta_source: self.eta_source,
        }
    }
}

pub fn run_sweep(req: &SweepRequest) -> ApiResult<Vec<u8>> {
    let methods = parse_methods(req.methods.as_deref())?;
    let result = sweep_with(&req.spec, &req.axis, &methods, req.options(), true)?;
    Ok(sweep::export(&result, req.format))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverRequest {
    pub spec: PopulationSpec,
    pub axis: SweepAxis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    /// Compared quantity; all four when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<Quantity>,
    #[serde(default)]
    pub other_covariance: OtherCovariance,
    #[serde(default)]
    pub eta_source: EtaSource,
}

pub fn crossovers(req: &CrossoverRequest) -> ApiResult<Vec<u8>> {
    let methods = parse_methods(req.methods.as_deref())?;
    let options = SweepOptions {
        other_covariance: req.other_covariance,
        eta_source: req.eta_source,
    };
    let result = sweep_with(&req.spec, &req.axis, &methods, options, true)?;
    let quantities = match req.quantity {
        Some(q) => vec![q],
        None => vec![
            Quantity::DeltaSe,
            Quantity::DeltaSp,
            Quantity::AbsDeltaSe,
            Quantity::AbsDeltaSp,
        ],
    };
    let found: Vec<_> = quantities
        .into_iter()
        .flat_map(|q| find_crossovers(&result, q))
        .collect();
    Ok(to_json_bytes(&found))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsRequest {
    pub spec: PopulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<BoundsContext>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsResponse {
    pub xi: [f64; 2],
    pub eps: [f64; 2],
    pub context: BoundsContext,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_plane: Option<HalfPlane>,
}

/// Admissible covariance intervals. The spec's own covariances are ignored.
pub fn bounds(req: &BoundsRequest) -> ApiResult<Vec<u8>> {
    let context = req.context.unwrap_or(BoundsContext::BasicJoint);
    let b = admissible_bounds(&req.spec, context)?;
    Ok(to_json_bytes(&BoundsResponse {
        xi: [b.xi_lo, b.xi_hi],
        eps: [b.eps_lo, b.eps_hi],
        context,
        half_plane: b.half_plane,
    }))
}

pub fn health() -> Vec<u8> {
    to_json_bytes(&serde_json::json!({ "status": "ok" }))
}

/// Plain-text summary of a verification run.
pub fn verify_summary(report: &VerifyReport) -> String {
    let mut out = format!(
        "samples: {}\nseed: {}\nchecks: {}\nmax discrepancy: {:e}\nfailures: {}\n",
        report.samples,
        report.seed,
        report.checks,
        report.max_discrepancy,
        report.failures.len()
    );
    for f in report.failures.iter().take(20) {
        out.push_str(&format!("  {}: {} at {:?}\n", f.check, f.detail, f.spec));
    }
    if report.failures.len() > 20 {
        out.push_str(&format!("  ... {} more\n", report.failures.len() - 20));
    }
    out.push_str(if report.passed() {
        "result: PASS\n"
    } else {
        "result: FAIL\n"
    });
    out
}

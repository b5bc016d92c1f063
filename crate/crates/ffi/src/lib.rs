//! C interface to the clustering pipeline.
//!
//! Graphs and results cross the boundary as opaque pointers and are released
//! with `pegc_graph_free` and `pegc_result_free`. Every fallible call
//! returns a [`PegcStatus`]; on failure a description of the most recent error
//! on the calling thread is available from [`pegc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pegc::embedding::{EigenOrder, EmbeddingScale};
use pegc::graph::{self, EdgeFormat, Graph, Partition};
use pegc::metrics;
use pegc::pipeline::{self, PipelineConfig, PipelineOutput, PrivacyBudget};
use pegc::sdp::SdpConfig;
use pegc::Error;

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PegcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidInput = 3,
    ComputationFailed = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Pipeline parameters. Obtain defaults from [`pegc_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PegcConfig {
    pub k: usize,
    pub seed: u64,
    /// Total ε; ignored when `privacy_disabled` is set.
    pub epsilon: f64,
    pub delta: f64,
    pub privacy_disabled: bool,
    pub lambda: f64,
    pub b: f64,
    pub p: u32,
    pub alpha: f64,
    pub beta: f64,
    /// Zero selects `min(k, 20)`.
    pub d_prime: usize,
    pub lambda_p_alpha: f64,
    pub max_iter: usize,
    /// Take the smallest eigenvalues instead of the largest.
    pub smallest_eigenvalues: bool,
    /// Keep unit eigenvector scale instead of the volume rescaling.
    pub unit_scale: bool,
}

/// A loaded graph.
pub struct PegcGraph {
    graph: Graph,
}

/// The output of one pipeline run.
pub struct PegcResult {
    output: PipelineOutput,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> PegcStatus {
    match err.root() {
        Error::InvalidConfig(_) => PegcStatus::InvalidArgument,
        Error::Io(_)
        | Error::Json(_)
        | Error::MalformedLine { .. }
        | Error::SelfLoop { .. }
        | Error::EmptyGraph
        | Error::LabelMismatch(_)
        | Error::InvalidPartition(_)
        | Error::DimensionMismatch { .. }
        | Error::DegreeZero { .. } => PegcStatus::InvalidInput,
        _ => PegcStatus::ComputationFailed,
    }
}

fn fail(status: PegcStatus, msg: impl Into<String>) -> PegcStatus {
    set_error(msg.into());
    status
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), PegcStatus>) -> PegcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PegcStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(PegcStatus::Panic, "internal panic"),
    }
}

fn lift(err: Error) -> PegcStatus {
    fail(status_of(&err), err.to_string())
}

unsafe fn require<'a, T>(p: *const T, what: &str) -> Result<&'a T, PegcStatus> {
    p.as_ref()
        .ok_or_else(|| fail(PegcStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], PegcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PegcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, PegcStatus> {
    p.as_mut()
        .ok_or_else(|| fail(PegcStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pegc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default parameters for `k` clusters. `epsilon` starts as NaN, so a run
/// fails until it is set or `privacy_disabled` is switched on.
#[no_mangle]
pub extern "C" fn pegc_config_default(k: usize, seed: u64) -> PegcConfig {
    let sdp = SdpConfig::default();
    PegcConfig {
        k,
        seed,
        epsilon: f64::NAN,
        delta: 1e-5,
        privacy_disabled: false,
        lambda: sdp.lambda,
        b: sdp.b,
        p: 1,
        alpha: 0.5,
        beta: 0.1,
        d_prime: 0,
        lambda_p_alpha: 1.0,
        max_iter: 100,
        smallest_eigenvalues: false,
        unit_scale: false,
    }
}

impl PegcConfig {
    fn to_pipeline(self) -> Result<PipelineConfig, Error> {
        let budget = if self.privacy_disabled {
            PrivacyBudget {
                delta: self.delta,
                ..PrivacyBudget::disabled()
            }
        } else {
            PrivacyBudget::split(self.epsilon, self.delta)?
        };
        Ok(PipelineConfig {
            sdp: SdpConfig {
                lambda: self.lambda,
                b: self.b,
                ..SdpConfig::default()
            },
            eigen_order: if self.smallest_eigenvalues {
                EigenOrder::Smallest
            } else {
                EigenOrder::Largest
            },
            embedding_scale: if self.unit_scale {
                EmbeddingScale::Unit
            } else {
                EmbeddingScale::Volume
            },
            p: self.p,
            alpha: self.alpha,
            beta: self.beta,
            d_prime: (self.d_prime > 0).then_some(self.d_prime),
            lambda_p_alpha: self.lambda_p_alpha,
            kmedian_max_iter: self.max_iter,
            ..PipelineConfig::new(self.k, budget, self.seed)
        })
    }
}

/// Builds a graph on vertices `0..n` from `len` edges `(src[i], dst[i])`.
///
/// # Safety
/// `src` and `dst` must point to `len` readable elements; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pegc_graph_from_edges(
    n: usize,
    src: *const usize,
    dst: *const usize,
    len: usize,
    out: *mut *mut PegcGraph,
) -> PegcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let src = slice(src, len, "src")?;
        let dst = slice(dst, len, "dst")?;
        let edges: Vec<(usize, usize)> = src.iter().copied().zip(dst.iter().copied()).collect();
        let graph = Graph::from_edges(n, &edges).map_err(lift)?;
        *out = Box::into_raw(Box::new(PegcGraph { graph }));
        Ok(())
    })
}

/// Parses an edge list (`u<TAB>v` or `u,v` per line).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pegc_graph_parse(
    text: *const c_char,
    csv: bool,
    remap_ids: bool,
    out: *mut *mut PegcGraph,
) -> PegcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let text = require(text, "text")?;
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| fail(PegcStatus::InvalidInput, "edge list is not valid UTF-8"))?;
        let format = if csv { EdgeFormat::Csv } else { EdgeFormat::Tsv };
        let graph = if remap_ids {
            graph::load_graph_remapped(text, format)
        } else {
            graph::load_graph(text, format)
        }
        .map_err(lift)?;
        *out = Box::into_raw(Box::new(PegcGraph { graph }));
        Ok(())
    })
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn pegc_graph_vertex_count(g: *const PegcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.vertex_count())
}

/// Number of edges, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn pegc_graph_edge_count(g: *const PegcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.edge_count())
}

/// # Safety
/// `g` must be null or a handle from this library that is not used again.
#[no_mangle]
pub unsafe extern "C" fn pegc_graph_free(g: *mut PegcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Runs the pipeline. `queries` holds dense vertex indices to explain.
///
/// # Safety
/// `g` and `cfg` must be valid; `queries` must point to `n_queries`
/// elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pegc_run(
    g: *const PegcGraph,
    cfg: *const PegcConfig,
    queries: *const usize,
    n_queries: usize,
    out: *mut *mut PegcResult,
) -> PegcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let g = &require(g, "graph")?.graph;
        let cfg = require(cfg, "config")?.to_pipeline().map_err(lift)?;
        let queries = slice(queries, n_queries, "queries")?;
        let output = pipeline::run_pipeline(g, queries, &cfg).map_err(lift)?;
        let json = serde_json::to_string(&output.document(g, &cfg)).map_err(|e| lift(e.into()))?;
        let json = CString::new(json).expect("JSON contains no NUL");
        *out = Box::into_raw(Box::new(PegcResult { output, json }));
        Ok(())
    })
}

/// Number of vertices covered by the result.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn pegc_result_vertex_count(r: *const PegcResult) -> usize {
    r.as_ref().map_or(0, |r| r.output.partition.len())
}

/// Copies the cluster index of every vertex into `buf` (capacity `len`).
///
/// # Safety
/// `r` must be a live result; `buf` must have room for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn pegc_result_assignment(r: *const PegcResult, buf: *mut usize, len: usize) -> PegcStatus {
    guard(|| {
        let r = require(r, "result")?;
        let a = r.output.partition.assignment();
        if len < a.len() {
            return Err(fail(
                PegcStatus::BufferTooSmall,
                format!("need {} slots, got {len}", a.len()),
            ));
        }
        if buf.is_null() {
            return Err(fail(PegcStatus::NullPointer, "buf is null"));
        }
        ptr::copy_nonoverlapping(a.as_ptr(), buf, a.len());
        Ok(())
    })
}

/// Final k-median cost on the critical set, or NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn pegc_result_cost(r: *const PegcResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.output.model.cost)
}

/// Explanation score of a queried vertex, looked up by external id.
///
/// # Safety
/// `r` must be a live result; `exp` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pegc_result_explanation(r: *const PegcResult, vertex: u64, exp: *mut f64) -> PegcStatus {
    guard(|| {
        let r = require(r, "result")?;
        let exp = out_ptr(exp, "exp")?;
        let e = r
            .output
            .explanations
            .get(vertex)
            .ok_or_else(|| fail(PegcStatus::InvalidArgument, format!("vertex {vertex} was not queried")))?;
        *exp = e.exp_value;
        Ok(())
    })
}

/// The result document as JSON. Owned by the result handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn pegc_result_json(r: *const PegcResult) -> *const c_char {
    r.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// # Safety
/// `r` must be null or a handle from this library that is not used again.
#[no_mangle]
pub unsafe extern "C" fn pegc_result_free(r: *mut PegcResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Adjusted Rand index between two labelings of `n` vertices.
///
/// # Safety
/// `a` and `b` must point to `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pegc_adjusted_rand_index(
    a: *const usize,
    b: *const usize,
    n: usize,
    out: *mut f64,
) -> PegcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let a = Partition::from_labels(slice(a, n, "a")?);
        let b = Partition::from_labels(slice(b, n, "b")?);
        *out = metrics::adjusted_rand_index(&a, &b).map_err(lift)?;
        Ok(())
    })
}

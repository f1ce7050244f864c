//! Canonical facet allocation: off-chip layouts that let every tile of a
//! uniform-dependence kernel read and write its inter-tile data with a few
//! long bursts.
//!
//! Pipeline: [`kernel`] describes the iteration space and flow sets,
//! [`facet`] allocates one facet per axis, [`layout`] orders each facet for
//! contiguity, [`plan`] turns layouts into per-tile transactions, [`sim`]
//! estimates bandwidth and [`codegen`] emits HLS copy functions that
//! [`lint`] reads back.

pub mod bench;
pub mod cexpr;
pub mod codegen;
pub mod facet;
pub mod kernel;
pub mod layout;
pub mod lint;
pub mod pipeline;
pub mod plan;
pub mod report;
pub mod sim;
pub mod textfmt;

pub use bench::{builtin_benchmarks, find_benchmark, BenchmarkDef};
pub use codegen::{emit_kernel, CodegenError, EmittedUnit};
pub use facet::{allocate_facets, verify_containment, FacetDescriptor, FacetError};
pub use kernel::{flow_in, flow_out, KernelError, KernelSpec, Point, PointSet, TileCoord};
pub use layout::{CfaLayout, FacetDim, FacetLayout, LayoutError};
pub use lint::{burst_lint, Violation};
pub use pipeline::{run_all, RunConfig, RunSummary};
pub use plan::{functional_check, LayoutContext, LayoutKind, Statement, Transaction, TransferPlan};
pub use sim::{simulate, BusModel, SimResult, SweepRow};
pub use textfmt::{parse_kernel_spec, ParseError};

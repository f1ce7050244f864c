//! HLS C emission: coalesced burst copy loops, the read/execute/write
//! stages and the dataflow top level.
//!
//! Every copy loop has a constant trip count, a pointer-increment off-chip
//! access and an on-chip index rebuilt each iteration from div/mod digits
//! of the loop counter. Off-chip start addresses are affine in the tile
//! coordinates, so one loop serves every tile of a boundary class.

use std::fmt::Write as _;

use thiserror::Error;

use crate::facet::axis_name;
use crate::kernel::{linear_index, KernelSpec, Point, TileCoord};
use crate::layout::{CfaLayout, FacetDim, FacetLayout, LayoutError};
use crate::plan::{plan_cfa, Direction, Transaction};

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("empty transaction at offset {0}")]
    EmptyTransaction(u64),
    #[error("transaction at offset {0} does not lie inside one facet")]
    StraddlesFacets(u64),
    #[error("on-chip index of the transaction at offset {0} is not a sum of counter digits")]
    NonAffineIndex(u64),
    #[error("emitted code disagrees with the plan of tile {tile}: {detail}")]
    RoundTrip { tile: TileCoord, detail: String },
    #[error(transparent)]
    Parse(#[from] crate::lint::CParseError),
}

/// `constant + sum_q coeffs[q] * tile_q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affine {
    pub constant: i64,
    pub coeffs: Vec<i64>,
}

impl Affine {
    pub fn eval(&self, tile: &[i64]) -> i64 {
        self.constant + self.coeffs.iter().zip(tile).map(|(c, t)| c * t).sum::<i64>()
    }

    pub fn render(&self) -> String {
        let mut terms: Vec<String> = Vec::new();
        for (q, &c) in self.coeffs.iter().enumerate() {
            match c {
                0 => {}
                1 => terms.push(axis_name(q)),
                _ => terms.push(format!("{c}*{}", axis_name(q))),
            }
        }
        join_terms(terms, self.constant)
    }
}

fn join_terms(terms: Vec<String>, constant: i64) -> String {
    let mut out = terms.join(" + ");
    if out.is_empty() {
        return constant.to_string();
    }
    if constant > 0 {
        let _ = write!(out, " + {constant}");
    } else if constant < 0 {
        let _ = write!(out, " - {}", -constant);
    }
    out
}

/// `((I + offset) / divisor) % modulus`, scaled by `coeff`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digit {
    pub offset: u64,
    pub divisor: u64,
    pub modulus: Option<u64>,
    pub coeff: i64,
}

impl Digit {
    fn value(&self, i: u64) -> i64 {
        let v = (i + self.offset) / self.divisor;
        self.modulus.map_or(v, |m| v % m) as i64
    }

    fn render(&self) -> String {
        let counter = if self.offset == 0 {
            "I".to_string()
        } else {
            format!("(I + {})", self.offset)
        };
        let mut out = if self.divisor == 1 {
            counter
        } else {
            format!("{counter} / {}", self.divisor)
        };
        if let Some(m) = self.modulus {
            let _ = write!(out, " % {m}");
        }
        out
    }
}

/// One coalesced copy loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopyLoopSpec {
    pub facet: String,
    pub direction: Direction,
    pub trip: u64,
    /// Element offset of the first access inside the facet array.
    pub start: Affine,
    pub index_constant: i64,
    pub digits: Vec<Digit>,
    /// Accepted counter ranges `(first, len)` of a guarded read.
    pub guard: Option<Vec<(u64, u64)>>,
    pub pipeline: bool,
}

impl CopyLoopSpec {
    /// On-chip buffer index at counter value `i`.
    pub fn index_at(&self, i: u64) -> i64 {
        self.index_constant + self.digits.iter().map(|d| d.coeff * d.value(i)).sum::<i64>()
    }

    fn index_text(&self, names: &[String]) -> String {
        let terms = self
            .digits
            .iter()
            .zip(names)
            .map(|(d, n)| if d.coeff == 1 { n.clone() } else { format!("{}*{n}", d.coeff) })
            .collect();
        join_terms(terms, self.index_constant)
    }

    fn guard_text(&self) -> Option<String> {
        let ranges = self.guard.as_ref()?;
        let parts: Vec<String> = ranges
            .iter()
            .map(|&(s, l)| {
                if l == 1 {
                    format!("I == {s}")
                } else {
                    format!("I >= {s} && I <= {}", s + l - 1)
                }
            })
            .collect();
        Some(if parts.len() == 1 {
            parts.into_iter().next().unwrap()
        } else {
            parts.iter().map(|p| format!("({p})")).collect::<Vec<_>>().join(" || ")
        })
    }

    /// Source lines, indented by `indent` levels of four spaces.
    pub fn render(&self, indent: usize, buf: &str) -> String {
        let pad = |n: usize| "    ".repeat(n);
        let mut out = String::new();
        if self.trip == 1 {
            let idx = self.index_text(&[]);
            let start = self.start.render();
            let line = match self.direction {
                Direction::Read => format!("{buf}[{idx}] = {}[{start}];", self.facet),
                Direction::Write => format!("{}[{start}] = {buf}[{idx}];", self.facet),
            };
            let _ = writeln!(out, "{}{line}", pad(indent));
            return out;
        }
        let names: Vec<String> = (0..self.digits.len()).map(|n| format!("c{n}")).collect();
        let _ = writeln!(out, "{}{{", pad(indent));
        let _ = writeln!(
            out,
            "{}data_t *offChipAddr = {} + ({});",
            pad(indent + 1),
            self.facet,
            self.start.render()
        );
        let _ = writeln!(
            out,
            "{}for (int I = 0; I <= {}; I = I + 1) {{",
            pad(indent + 1),
            self.trip - 1
        );
        if self.pipeline {
            out.push_str("#pragma HLS PIPELINE II=1\n");
        }
        for (d, n) in self.digits.iter().zip(&names) {
            let _ = writeln!(out, "{}int {n} = {};", pad(indent + 2), d.render());
        }
        let idx = self.index_text(&names);
        let access = match self.direction {
            Direction::Read => format!("{buf}[{idx}] = *offChipAddr;"),
            Direction::Write => format!("*offChipAddr = {buf}[{idx}];"),
        };
        match self.guard_text() {
            Some(cond) => {
                let _ = writeln!(out, "{}if ({cond})", pad(indent + 2));
                let _ = writeln!(out, "{}{access}", pad(indent + 3));
            }
            None => {
                let _ = writeln!(out, "{}{access}", pad(indent + 2));
            }
        }
        let _ = writeln!(out, "{}offChipAddr = offChipAddr + 1;", pad(indent + 2));
        let _ = writeln!(out, "{}}}", pad(indent + 1));
        let _ = writeln!(out, "{}}}", pad(indent));
        out
    }
}

/// Lower corner and extents of the on-chip footprint buffer of `tile`: the
/// tile extended backwards by the dependence reach.
pub fn footprint(spec: &KernelSpec, tile: &TileCoord) -> (Vec<i64>, Vec<i64>) {
    let reach = spec.reach();
    let tb = spec.tile_box(tile);
    let lo = tb.lo.iter().zip(&reach).map(|(l, r)| l - r).collect();
    let ext = tb.extent.iter().zip(&reach).map(|(e, r)| e + r).collect();
    (lo, ext)
}

pub fn footprint_len(spec: &KernelSpec) -> u64 {
    spec.tile_sizes
        .iter()
        .zip(spec.reach())
        .map(|(t, r)| (t + r) as u64)
        .product()
}

/// Index of `point` in the footprint buffer of `tile`.
pub fn footprint_index(spec: &KernelSpec, tile: &TileCoord, point: &[i64]) -> u64 {
    let (lo, ext) = footprint(spec, tile);
    let rel: Point = point.iter().zip(&lo).map(|(x, l)| x - l).collect();
    linear_index(&ext, &rel)
}

fn footprint_strides(spec: &KernelSpec) -> Vec<i64> {
    let ext: Vec<i64> = spec.tile_sizes.iter().zip(spec.reach()).map(|(t, r)| t + r).collect();
    let mut strides = vec![1; ext.len()];
    for q in (0..ext.len().saturating_sub(1)).rev() {
        strides[q] = strides[q + 1] * ext[q + 1];
    }
    strides
}

/// Copy loop of `tx` for `tile`, with the off-chip start expressed in the
/// tile coordinates.
pub fn emit_copy(
    spec: &KernelSpec,
    facet: &FacetLayout,
    tx: &Transaction,
    tile: &TileCoord,
) -> Result<CopyLoopSpec, CodegenError> {
    if tx.length == 0 {
        return Err(CodegenError::EmptyTransaction(tx.base));
    }
    if tx.base < facet.base || tx.end() > facet.base + facet.capacity() {
        return Err(CodegenError::StraddlesFacets(tx.base));
    }
    let local0 = tx.base - facet.base;
    let blk = facet.block_len();
    let s0 = local0 % blk;
    let fs = footprint_strides(spec);
    let k = facet.facet.axis;
    let n_outer = facet.order.iter().filter(|d| matches!(d, FacetDim::Outer(_))).count();

    let mut candidates = Vec::new();
    if let Some(FacetDim::Outer(c)) = facet.order[..n_outer].last() {
        candidates.push(Digit {
            offset: s0,
            divisor: blk,
            modulus: None,
            coeff: spec.tile_sizes[*c] * fs[*c],
        });
    }
    for (idx, dim) in facet.order.iter().enumerate().skip(n_outer) {
        let coeff = match dim {
            FacetDim::Inner(q) => fs[*q],
            FacetDim::Slab => fs[k],
            FacetDim::Outer(_) => unreachable!("outer dimensions come first"),
        };
        candidates.push(Digit {
            offset: s0,
            divisor: facet.strides[idx],
            modulus: Some(facet.extents[idx] as u64),
            coeff,
        });
    }
    let last = tx.length - 1;
    let mut digits = Vec::new();
    for mut d in candidates {
        if (d.offset + last) / d.divisor == d.offset / d.divisor {
            continue;
        }
        if let Some(m) = d.modulus {
            if (d.offset + last) / d.divisor < m {
                d.modulus = None;
            }
        }
        digits.push(d);
    }

    let index_of = |i: u64| -> i64 {
        let p = facet.point_at(tx.base + i).expect("offset inside facet");
        footprint_index(spec, tile, &p) as i64
    };
    let base_index = index_of(0);
    let index_constant = base_index - digits.iter().map(|d| d.coeff * d.value(0)).sum::<i64>();
    let spec_loop = CopyLoopSpec {
        facet: facet.name(),
        direction: tx.direction,
        trip: tx.length,
        start: Affine { constant: 0, coeffs: vec![] },
        index_constant,
        digits,
        guard: tx.guard.as_ref().map(|g| g.ranges.clone()),
        pipeline: tx.length > 1,
    };
    if (0..tx.length).any(|i| spec_loop.index_at(i) != index_of(i)) {
        return Err(CodegenError::NonAffineIndex(tx.base));
    }
    let coeffs: Vec<i64> = facet.tile_strides().iter().map(|&s| s as i64).collect();
    let constant = local0 as i64 - coeffs.iter().zip(&tile.0).map(|(c, t)| c * t).sum::<i64>();
    Ok(CopyLoopSpec {
        start: Affine { constant, coeffs },
        ..spec_loop
    })
}

/// A generated source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedUnit {
    pub kernel: String,
    pub file_name: String,
    pub source: String,
    pub functions: Vec<String>,
    /// Facet pointer parameters, in argument order.
    pub facets: Vec<String>,
    pub interfaces: Vec<String>,
}

fn c_ident(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if out.chars().next().is_none_or(|c| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

fn element_type(bytes: u32) -> String {
    match bytes {
        8 => "double".into(),
        4 => "float".into(),
        2 => "short".into(),
        1 => "char".into(),
        n => format!("struct {{ unsigned char bytes[{n}]; }}"),
    }
}

pub fn tiles_define(axis: usize) -> String {
    format!("CFA_TILES_{}", axis_name(axis).to_uppercase())
}

/// Read-side boundary classes: which axes have a predecessor tile. Only
/// classes that occur in the space are returned, most interior first.
fn read_classes(spec: &KernelSpec) -> Vec<Vec<bool>> {
    let d = spec.dims();
    let counts = spec.tile_counts();
    (0..1u32 << d)
        .rev()
        .map(|mask| (0..d).map(|q| mask & (1 << (d - 1 - q)) != 0).collect::<Vec<bool>>())
        .filter(|class| class.iter().zip(&counts).all(|(&has, &n)| !has || n > 1))
        .collect()
}

/// Emits the complete accelerator for `spec` under its facet allocation.
pub fn emit_kernel(name: &str, spec: &KernelSpec) -> Result<EmittedUnit, CodegenError> {
    let layout = CfaLayout::build(spec)?;
    emit_with_layout(name, spec, &layout)
}

pub fn emit_with_layout(name: &str, spec: &KernelSpec, layout: &CfaLayout) -> Result<EmittedUnit, CodegenError> {
    let id = c_ident(name);
    let d = spec.dims();
    let coords: Vec<String> = (0..d).map(axis_name).collect();
    let facets: Vec<String> = layout.facets.iter().map(|f| f.name()).collect();
    let facet_params = facets
        .iter()
        .map(|f| format!("data_t *{f}"))
        .collect::<Vec<_>>()
        .join(", ");
    let coord_params = coords.iter().map(|c| format!("int {c}")).collect::<Vec<_>>().join(", ");
    let join = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join("x");
    let functions = vec![
        format!("{id}_read"),
        format!("{id}_execute"),
        format!("{id}_write"),
        format!("{id}_toplevel"),
    ];

    let mut src = String::new();
    let _ = writeln!(src, "/* {name}: canonical facet allocation accelerator");
    let _ = writeln!(
        src,
        " * space {}, tiles {}, {} tiles",
        join(&spec.space_sizes),
        join(&spec.tile_sizes),
        join(&spec.tile_counts())
    );
    for f in &layout.facets {
        let _ = writeln!(src, " * {}{}, {} elements", f.name(), f.order_string(), f.capacity());
    }
    src.push_str(" */\n\n");
    for q in 0..d {
        let _ = writeln!(src, "#define {} {}", tiles_define(q), spec.tile_counts()[q]);
    }
    let _ = writeln!(src, "#define CFA_FOOTPRINT {}", footprint_len(spec));
    src.push('\n');
    let _ = writeln!(src, "typedef {} data_t;\n", element_type(spec.element_bytes));
    src.push_str("#ifndef CFA_STATEMENT\n");
    src.push_str("#define CFA_STATEMENT(in, out, idx) ((out)[idx] = (in)[idx])\n");
    src.push_str("#endif\n\n");

    // Read stage.
    let _ = writeln!(
        src,
        "static void {}({coord_params}, {facet_params}, data_t buf[CFA_FOOTPRINT])\n{{",
        functions[0]
    );
    for class in read_classes(spec) {
        let rep = TileCoord(class.iter().map(|&has| has as i64).collect());
        let plan = plan_cfa(spec, layout, &rep);
        if plan.reads.is_empty() {
            continue;
        }
        let cond = coords
            .iter()
            .zip(&class)
            .map(|(c, &has)| if has { format!("{c} > 0") } else { format!("{c} == 0") })
            .collect::<Vec<_>>()
            .join(" && ");
        let _ = writeln!(src, "    if ({cond}) {{");
        for tx in &plan.reads {
            let facet = owner(layout, tx)?;
            src.push_str(&emit_copy(spec, facet, tx, &rep)?.render(2, "buf"));
        }
        src.push_str("    }\n");
    }
    src.push_str("}\n\n");

    // Execute stage.
    let _ = writeln!(
        src,
        "static void {}({coord_params}, data_t in[CFA_FOOTPRINT], data_t out[CFA_FOOTPRINT])\n{{",
        functions[1]
    );
    let reach = spec.reach();
    let fs = footprint_strides(spec);
    for q in 0..d {
        let _ = writeln!(
            src,
            "{}for (int x{q} = {}; x{q} <= {}; x{q} = x{q} + 1)",
            "    ".repeat(q + 1),
            reach[q],
            reach[q] + spec.tile_sizes[q] - 1
        );
    }
    let idx = (0..d)
        .map(|q| if fs[q] == 1 { format!("x{q}") } else { format!("{}*x{q}", fs[q]) })
        .collect::<Vec<_>>()
        .join(" + ");
    let _ = writeln!(src, "{}CFA_STATEMENT(in, out, {idx});", "    ".repeat(d + 1));
    src.push_str("}\n\n");

    // Write stage: the last tile along an axis has no consumer there.
    let _ = writeln!(
        src,
        "static void {}({coord_params}, data_t buf[CFA_FOOTPRINT], {facet_params})\n{{",
        functions[2]
    );
    let origin = TileCoord(vec![0; d]);
    let counts = spec.tile_counts();
    for f in &layout.facets {
        let k = f.facet.axis;
        if counts[k] < 2 {
            continue;
        }
        let tx = Transaction {
            kind: crate::plan::TxKind::Burst,
            direction: Direction::Write,
            base: f.block_start(&origin),
            length: f.block_len(),
            useful: f.block_len(),
            guard: None,
        };
        let _ = writeln!(src, "    if ({} < {} - 1) {{", coords[k], tiles_define(k));
        src.push_str(&emit_copy(spec, f, &tx, &origin)?.render(2, "buf"));
        src.push_str("    }\n");
    }
    src.push_str("}\n\n");

    // Top level.
    let args = coords.join(", ");
    let fargs = facets.join(", ");
    let _ = writeln!(src, "void {}({coord_params}, {facet_params})\n{{", functions[3]);
    let interfaces: Vec<String> = layout
        .facets
        .iter()
        .map(|f| format!("#pragma HLS INTERFACE m_axi port={} depth={}", f.name(), f.capacity()))
        .collect();
    for line in &interfaces {
        let _ = writeln!(src, "{line}");
    }
    src.push_str("#pragma HLS DATAFLOW\n");
    src.push_str("    data_t buf1[CFA_FOOTPRINT];\n");
    src.push_str("    data_t buf2[CFA_FOOTPRINT];\n");
    let _ = writeln!(src, "    {}({args}, {fargs}, buf1);", functions[0]);
    let _ = writeln!(src, "    {}({args}, buf1, buf2);", functions[1]);
    let _ = writeln!(src, "    {}({args}, buf2, {fargs});", functions[2]);
    src.push_str("}\n");

    Ok(EmittedUnit {
        kernel: name.to_string(),
        file_name: format!("{id}.c"),
        source: src,
        functions,
        facets,
        interfaces,
    })
}

fn owner<'a>(layout: &'a CfaLayout, tx: &Transaction) -> Result<&'a FacetLayout, CodegenError> {
    layout
        .facets
        .iter()
        .find(|f| tx.base >= f.base && tx.end() <= f.base + f.capacity())
        .ok_or(CodegenError::StraddlesFacets(tx.base))
}

/// Manifest listing every unit, its functions and facet pointer order.
pub fn manifest(units: &[EmittedUnit]) -> String {
    let mut out = String::new();
    for u in units {
        let _ = writeln!(out, "kernel {}", u.kernel);
        let _ = writeln!(out, "file {}", u.file_name);
        let _ = writeln!(out, "functions {}", u.functions.join(" "));
        let _ = writeln!(out, "facets {}", u.facets.join(" "));
        out.push('\n');
    }
    out
}

/// Writes every unit and `manifest.txt` into `dir`.
pub fn write_units(dir: &std::path::Path, units: &[EmittedUnit]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for u in units {
        std::fs::write(dir.join(&u.file_name), &u.source)?;
    }
    std::fs::write(dir.join("manifest.txt"), manifest(units))
}

/// Replays the emitted read and write stages for every tile and compares
/// the (facet offset, on-chip index, stored) triples with the plans.
/// Returns the number of elements compared.
pub fn verify_round_trip(spec: &KernelSpec, layout: &CfaLayout, unit: &EmittedUnit) -> Result<usize, CodegenError> {
    use crate::lint::{replay, Access, ParsedUnit};

    let parsed = ParsedUnit::parse(&unit.source)?;
    let mut checked = 0;
    for tile in spec.tiles() {
        let plan = plan_cfa(spec, layout, &tile);
        for (function, txs, write) in [(&unit.functions[0], &plan.reads, false), (&unit.functions[2], &plan.writes, true)] {
            let mut expected = Vec::new();
            for tx in txs {
                let f = owner(layout, tx)?;
                for rel in 0..tx.length {
                    let stored = tx.accepts(rel);
                    let p = f.point_at(tx.base + rel).expect("offset inside facet");
                    expected.push(Access {
                        facet: f.name(),
                        offset: (tx.base + rel - f.base) as i64,
                        buf_index: if stored { footprint_index(spec, &tile, &p) as i64 } else { -1 },
                        stored,
                        write,
                    });
                }
            }
            let mut got = replay(&parsed, function, &tile.0)?;
            for a in &mut got {
                if !a.stored {
                    a.buf_index = -1;
                }
            }
            expected.sort();
            got.sort();
            if expected != got {
                let detail = match expected.iter().zip(&got).find(|(e, g)| e != g) {
                    Some((e, g)) => format!("{function}: expected {e:?}, emitted {g:?}"),
                    None => format!("{function}: {} accesses expected, {} emitted", expected.len(), got.len()),
                };
                return Err(CodegenError::RoundTrip { tile, detail });
            }
            checked += expected.len();
        }
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{fig4_spec, jacobi2d5p, single_dep_spec};
    use crate::lint::{burst_lint, ViolationKind};
    use crate::plan::{Guard, TxKind};

    #[test]
    fn copy_loop_shape() {
        let spec = fig4_spec();
        let layout = CfaLayout::build(&spec).unwrap();
        let f = layout.facet(1).unwrap();
        let tx = Transaction {
            kind: TxKind::Burst,
            direction: Direction::Write,
            base: f.block_start(&TileCoord(vec![0, 0, 0])),
            length: f.block_len(),
            useful: f.block_len(),
            guard: None,
        };
        let lp = emit_copy(&spec, f, &tx, &TileCoord(vec![0, 0, 0])).unwrap();
        let text = lp.render(0, "buf");
        assert!(text.contains("for (int I = 0; I <= 49; I = I + 1) {"), "{text}");
        assert!(text.contains("#pragma HLS PIPELINE II=1"));
        assert!(text.contains("offChipAddr = offChipAddr + 1;"));
        assert!(text.contains("*offChipAddr = buf["));
    }

    #[test]
    fn single_element_is_an_assignment() {
        let spec = fig4_spec();
        let layout = CfaLayout::build(&spec).unwrap();
        let f = layout.facet(0).unwrap();
        let tx = Transaction {
            kind: TxKind::Element,
            direction: Direction::Read,
            base: f.block_start(&TileCoord(vec![0, 1, 1])) + 7,
            length: 1,
            useful: 1,
            guard: None,
        };
        let text = emit_copy(&spec, f, &tx, &TileCoord(vec![1, 1, 1])).unwrap().render(0, "buf");
        assert_eq!(text.lines().count(), 1);
        assert!(!text.contains("for"));
        assert!(text.starts_with("buf[") && text.contains("= facet_i["), "{text}");
    }

    #[test]
    fn guarded_read_renders_ranges() {
        let spec = fig4_spec();
        let layout = CfaLayout::build(&spec).unwrap();
        let f = layout.facet(0).unwrap();
        let tx = Transaction {
            kind: TxKind::Burst,
            direction: Direction::Read,
            base: f.base,
            length: 10,
            useful: 3,
            guard: Some(Guard { ranges: vec![(0, 2), (7, 1)] }),
        };
        let text = emit_copy(&spec, f, &tx, &TileCoord(vec![1, 0, 0])).unwrap().render(0, "buf");
        assert!(text.contains("if ((I >= 0 && I <= 1) || (I == 7))"), "{text}");
    }

    #[test]
    fn toplevel_structure() {
        let unit = emit_kernel("fig4", &fig4_spec()).unwrap();
        assert_eq!(unit.facets, vec!["facet_i", "facet_j", "facet_k"]);
        assert!(unit.source.contains("void fig4_toplevel(int i, int j, int k, data_t *facet_i, data_t *facet_j, data_t *facet_k)"));
        for f in &unit.facets {
            assert!(unit.source.contains(&format!("#pragma HLS INTERFACE m_axi port={f} depth=")));
        }
        assert!(unit.source.contains("#pragma HLS DATAFLOW"));
        assert!(unit.source.contains("fig4_read(i, j, k, facet_i, facet_j, facet_k, buf1);"));
        let single = emit_kernel("one", &single_dep_spec(3)).unwrap();
        assert_eq!(single.facets, vec!["facet_i"]);
    }

    #[test]
    fn emission_is_deterministic() {
        let spec = jacobi2d5p().reduced_spec();
        assert_eq!(emit_kernel("j", &spec).unwrap(), emit_kernel("j", &spec).unwrap());
    }

    #[test]
    fn emitted_code_replays_the_plans() {
        for spec in [fig4_spec(), jacobi2d5p().reduced_spec(), single_dep_spec(2)] {
            let layout = CfaLayout::build(&spec).unwrap();
            let unit = emit_with_layout("k", &spec, &layout).unwrap();
            assert!(verify_round_trip(&spec, &layout, &unit).unwrap() > 0);
            assert_eq!(burst_lint(&unit.source), vec![]);
        }
    }

    #[test]
    fn lint_catches_mutations() {
        let unit = emit_kernel("fig4", &fig4_spec()).unwrap();
        let stride = unit.source.replacen("offChipAddr = offChipAddr + 1;", "offChipAddr = offChipAddr + 2;", 1);
        let kinds: Vec<_> = burst_lint(&stride).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::NonConsecutive), "{kinds:?}");

        let at = unit.source.find("for (int I = 0; I <= ").unwrap();
        let end = at + unit.source[at..].match_indices(';').nth(1).unwrap().0 + 1;
        let mut symbolic = unit.source.clone();
        symbolic.replace_range(at..end, "for (int I = 0; I <= n;");
        let kinds: Vec<_> = burst_lint(&symbolic).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::NonConstantTrip), "{kinds:?}");

        let unpipelined = unit.source.replacen("#pragma HLS PIPELINE II=1\n", "", 1);
        let kinds: Vec<_> = burst_lint(&unpipelined).iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::NotPipelined]);

        let depth = format!("port=facet_j depth={}", CfaLayout::build(&fig4_spec()).unwrap().facets[1].capacity());
        let shallow = unit.source.replacen(&depth, "port=facet_j depth=1", 1);
        let kinds: Vec<_> = burst_lint(&shallow).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::OutOfBounds), "{kinds:?}");
    }
}

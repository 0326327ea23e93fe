//! Best-first seeded region growing: lowest-energy meta-disparities are
//! visited first and propagate a narrow disparity range to their
//! 4-neighbors, each solved by constrained per-pixel minimization.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::energy::{eta, local_energy, local_energy_gated, EnergyContext, EtaPair};
use crate::error::{FusionError, Result};
use crate::field::{DisparityField, SparsePrior};
use crate::image::ColorImage;
use crate::params::{EtaMode, FusionParams};

const UNASSIGNED: i64 = -2;
const SEED_PARENT: i64 = -1;

/// Fraction of the image area below which an invalid component is filled
/// with the scattered-data filter instead of the streak rule.
const FILTER_FILL_FRACTION: f64 = 0.005;

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    energy: f64,
    pixel: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.energy == other.energy && self.pixel == other.pixel
    }
}
impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    // BinaryHeap is a max-heap; invert so the lowest energy pops first,
    // ties broken by row-major pixel order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .energy
            .partial_cmp(&self.energy)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.pixel.cmp(&self.pixel))
    }
}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

trait GrowQueue {
    fn push(&mut self, e: QueueEntry);
    fn pop(&mut self) -> Option<QueueEntry>;
    fn is_empty(&self) -> bool;
}

struct HeapQueue(BinaryHeap<QueueEntry>);

impl GrowQueue for HeapQueue {
    fn push(&mut self, e: QueueEntry) {
        self.0.push(e);
    }
    fn pop(&mut self) -> Option<QueueEntry> {
        self.0.pop()
    }
    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Reference queue: linear scan for the minimum. Used to check that the
/// output does not depend on the priority structure.
struct ScanQueue(Vec<QueueEntry>);

impl GrowQueue for ScanQueue {
    fn push(&mut self, e: QueueEntry) {
        self.0.push(e);
    }
    fn pop(&mut self) -> Option<QueueEntry> {
        if self.0.is_empty() {
            return None;
        }
        let mut best = 0;
        for i in 1..self.0.len() {
            let (a, b) = (&self.0[i], &self.0[best]);
            if a.energy < b.energy || (a.energy == b.energy && a.pixel < b.pixel) {
                best = i;
            }
        }
        Some(self.0.swap_remove(best))
    }
    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One growth step, for debugging and the forest-structure checks.
#[derive(Debug, Clone, Copy)]
pub struct TraceEvent {
    pub step: usize,
    pub pixel: usize,
    /// Row-major parent index, -1 for seeds.
    pub parent: i64,
    pub d: i32,
    pub t: f64,
    pub energy: f64,
}

/// Dense result of a growing or WTA run.
#[derive(Debug, Clone)]
pub struct GrowOutput {
    pub field: DisparityField,
    pub d: Vec<i32>,
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    /// Row-major parent index per pixel; -1 seed, -2 unassigned.
    pub parent: Vec<i64>,
    pub pops: usize,
    pub trace: Option<Vec<TraceEvent>>,
}

impl GrowOutput {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,pixel,parent,d,t,energy\n");
        if let Some(trace) = &self.trace {
            for e in trace {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    e.step, e.pixel, e.parent, e.d, e.t, e.energy
                ));
            }
        }
        out
    }
}

/// Solve the constrained per-pixel problem: the best (d, t) with
/// d in [d_lo, d_hi] and t from the criterion. `anchor` breaks exact
/// energy ties toward the parent disparity.
///
/// When the stereo weight is zero the continuous optimum is the prior
/// itself, clamped to the candidate range and split into (d; t).
pub fn solve_pixel(
    ctx: &EnergyContext,
    p: (usize, usize),
    d_lo: i32,
    d_hi: i32,
    anchor: i32,
) -> Option<(i32, f64, f64)> {
    let eta_pair = eta(ctx, p);
    if eta_pair.is_infeasible() {
        return None;
    }
    let (eta_s, eta_d) = eta_pair.weights();
    if eta_s == 0.0 {
        let d0 = ctx.d0.get(p.0, p.1)? as f64;
        let dc = d0.clamp(d_lo as f64, d_hi as f64);
        let d = dc.round() as i32;
        let t = dc - d as f64;
        let e = eta_d * ctx.params.lambda * (dc - d0).abs();
        return Some((d, t, e));
    }
    let mut best: Option<(i32, f64, f64)> = None;
    for d in d_lo..=d_hi {
        let Ok((e, t)) = local_energy(ctx, p, d) else {
            return None;
        };
        let better = match &best {
            None => true,
            Some((bd, _, be)) => {
                e < *be
                    || (e == *be
                        && ((d - anchor).abs() < (bd - anchor).abs()
                            || ((d - anchor).abs() == (bd - anchor).abs() && d < *bd)))
            }
        };
        if better {
            best = Some((d, t, e));
        }
    }
    best
}

fn neighbor_offsets() -> [(i64, i64); 4] {
    [(0, -1), (0, 1), (-1, 0), (1, 0)]
}

struct GrowRun<'a, 'c> {
    ctx: &'a EnergyContext<'c>,
    d: Vec<i32>,
    t: Vec<f64>,
    energy: Vec<f64>,
    parent: Vec<i64>,
    assigned: Vec<bool>,
    visited: Vec<bool>,
    seed_prior_d: Vec<i32>,
    pops: usize,
    trace: Option<Vec<TraceEvent>>,
}

impl<'a, 'c> GrowRun<'a, 'c> {
    fn new(ctx: &'a EnergyContext<'c>, trace: bool) -> Self {
        let n = ctx.width() * ctx.height();
        Self {
            ctx,
            d: vec![0; n],
            t: vec![0.0; n],
            energy: vec![0.0; n],
            parent: vec![UNASSIGNED; n],
            assigned: vec![false; n],
            visited: vec![false; n],
            seed_prior_d: vec![0; n],
            pops: 0,
            trace: trace.then(Vec::new),
        }
    }

    fn seed<Q: GrowQueue>(&mut self, prior: &SparsePrior, queue: &mut Q) -> Result<()> {
        if prior.is_empty() {
            return Err(FusionError::EmptySeedSet);
        }
        let params = self.ctx.params;
        let mut any = false;
        for s in &prior.entries {
            let idx = s.y * self.ctx.width() + s.x;
            if self.assigned[idx] {
                continue;
            }
            let d = (s.d.round() as i32).clamp(params.d_min, params.d_max);
            // seeds keep t = 0; energy evaluated without subpixel correction
            let Ok((e, _)) = local_energy_gated(self.ctx, (s.x, s.y), d, false) else {
                continue; // infeasible pixel, seed dropped
            };
            self.d[idx] = d;
            self.t[idx] = 0.0;
            self.energy[idx] = e;
            self.parent[idx] = SEED_PARENT;
            self.assigned[idx] = true;
            self.seed_prior_d[idx] = d;
            any = true;
            queue.push(QueueEntry {
                energy: e,
                pixel: idx,
            });
        }
        if !any {
            return Err(FusionError::EmptySeedSet);
        }
        Ok(())
    }

    fn expand<Q: GrowQueue>(&mut self, queue: &mut Q) -> bool {
        let Some(entry) = queue.pop() else {
            return false;
        };
        let w = self.ctx.width();
        let h = self.ctx.height();
        let params = self.ctx.params;
        let idx = entry.pixel;
        debug_assert!(!self.visited[idx], "pixel popped twice");
        self.visited[idx] = true;
        self.pops += 1;

        // First visit of a seed: refine it around its own prior before
        // expanding, with the same constrained solver the neighbors use.
        if self.parent[idx] == SEED_PARENT {
            let p = (idx % w, idx / w);
            let anchor = self.seed_prior_d[idx];
            let lo = (anchor - params.r).max(params.d_min);
            let hi = (anchor + params.r).min(params.d_max);
            if let Some((d, t, e)) = solve_pixel(self.ctx, p, lo, hi, anchor) {
                self.d[idx] = d;
                self.t[idx] = t;
                self.energy[idx] = e;
            }
            if let Some(trace) = &mut self.trace {
                trace.push(TraceEvent {
                    step: self.pops,
                    pixel: idx,
                    parent: SEED_PARENT,
                    d: self.d[idx],
                    t: self.t[idx],
                    energy: self.energy[idx],
                });
            }
        }

        let parent_d = self.d[idx];
        let (px, py) = ((idx % w) as i64, (idx / w) as i64);
        for (dx, dy) in neighbor_offsets() {
            let (nx, ny) = (px + dx, py + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let q = (nx as usize, ny as usize);
            let qidx = q.1 * w + q.0;
            if self.assigned[qidx] {
                continue;
            }
            // depth-occluded areas are not grown (adaptive mode only)
            if matches!(params.eta_mode, EtaMode::Adaptive) && self.ctx.masks.is_depth_occ(q.0, q.1)
            {
                continue;
            }
            if eta(self.ctx, q) == EtaPair::Infeasible {
                continue;
            }
            let lo = (parent_d - params.r).max(params.d_min);
            let hi = (parent_d + params.r).min(params.d_max);
            let Some((d, t, e)) = solve_pixel(self.ctx, q, lo, hi, parent_d) else {
                continue;
            };
            if e < params.t_threshold {
                self.d[qidx] = d;
                self.t[qidx] = t;
                self.energy[qidx] = e;
                self.parent[qidx] = idx as i64;
                self.assigned[qidx] = true;
                queue.push(QueueEntry {
                    energy: e,
                    pixel: qidx,
                });
                if let Some(trace) = &mut self.trace {
                    trace.push(TraceEvent {
                        step: self.pops,
                        pixel: qidx,
                        parent: idx as i64,
                        d,
                        t,
                        energy: e,
                    });
                }
            }
        }
        true
    }

    fn finish(self) -> GrowOutput {
        let w = self.ctx.width();
        let h = self.ctx.height();
        let mut field = DisparityField::invalid(w, h);
        for idx in 0..w * h {
            if self.assigned[idx] {
                field.set(idx % w, idx / w, (self.d[idx] as f64 + self.t[idx]) as f32);
            }
        }
        GrowOutput {
            field,
            d: self.d,
            t: self.t,
            energy: self.energy,
            parent: self.parent,
            pops: self.pops,
            trace: self.trace,
        }
    }
}

fn grow_impl<Q: GrowQueue>(
    prior: &SparsePrior,
    ctx: &EnergyContext,
    mut queue: Q,
    trace: bool,
) -> Result<GrowOutput> {
    let mut run = GrowRun::new(ctx, trace);
    run.seed(prior, &mut queue)?;
    let budget = ctx.width() * ctx.height();
    while !queue.is_empty() {
        assert!(run.pops <= budget, "grow exceeded pixel budget");
        run.expand(&mut queue);
    }
    Ok(run.finish())
}

/// Run the full seeded growing until no unvisited meta-disparity remains.
pub fn grow(prior: &SparsePrior, ctx: &EnergyContext) -> Result<GrowOutput> {
    grow_impl(prior, ctx, HeapQueue(BinaryHeap::new()), false)
}

/// As `grow` but recording the growth trace.
pub fn grow_traced(prior: &SparsePrior, ctx: &EnergyContext) -> Result<GrowOutput> {
    grow_impl(prior, ctx, HeapQueue(BinaryHeap::new()), true)
}

/// Determinism reference: identical growing driven by a linear-scan queue.
pub fn grow_scan_queue(prior: &SparsePrior, ctx: &EnergyContext) -> Result<GrowOutput> {
    grow_impl(prior, ctx, ScanQueue(Vec::new()), false)
}

/// Winner-take-all baseline: independent per-pixel argmin over the full
/// disparity range, no propagation and no validation threshold.
pub fn wta_baseline(ctx: &EnergyContext) -> GrowOutput {
    let w = ctx.width();
    let h = ctx.height();
    let params = ctx.params;
    let mid = ((params.d_min + params.d_max) as f64 / 2.0).round() as i32;
    let results: Vec<Option<(i32, f64, f64)>> = (0..w * h)
        .into_par_iter()
        .map(|idx| {
            let p = (idx % w, idx / w);
            let anchor = match ctx.d0.get(p.0, p.1) {
                Some(d0) => (d0.round() as i32).clamp(params.d_min, params.d_max),
                None => mid,
            };
            solve_pixel(ctx, p, params.d_min, params.d_max, anchor)
        })
        .collect();

    let mut field = DisparityField::invalid(w, h);
    let mut d = vec![0; w * h];
    let mut t = vec![0.0; w * h];
    let mut energy = vec![0.0; w * h];
    let mut parent = vec![UNASSIGNED; w * h];
    for (idx, r) in results.iter().enumerate() {
        if let Some((dd, tt, ee)) = r {
            field.set(idx % w, idx / w, (*dd as f64 + tt) as f32);
            d[idx] = *dd;
            t[idx] = *tt;
            energy[idx] = *ee;
            parent[idx] = SEED_PARENT;
        }
    }
    GrowOutput {
        field,
        d,
        t,
        energy,
        parent,
        pops: 0,
        trace: None,
    }
}

/// Fill remaining gaps: small invalid components through the scattered
/// upsampling filter over the grown values, everything else by scanline
/// streak filling with the smaller neighboring disparity. Returns the
/// filled field and whether it is fully dense.
pub fn post_fill(
    field: &DisparityField,
    guide: &ColorImage,
    params: &FusionParams,
) -> (DisparityField, bool) {
    let w = field.width();
    let h = field.height();
    if field.valid_count() == 0 {
        return (field.clone(), false);
    }
    let mut out = field.clone();

    // connected components of invalid pixels (4-connectivity)
    let mut comp = vec![usize::MAX; w * h];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for start in 0..w * h {
        if field.valid_flags()[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(idx) = stack.pop() {
            members.push(idx);
            let (x, y) = ((idx % w) as i64, (idx / w) as i64);
            for (dx, dy) in neighbor_offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if !field.valid_flags()[nidx] && comp[nidx] == usize::MAX {
                    comp[nidx] = id;
                    stack.push(nidx);
                }
            }
        }
        comps.push(members);
    }

    let small_limit = ((w * h) as f64 * FILTER_FILL_FRACTION).ceil() as usize;
    let radius = params.upsample_radius as i64;
    let sigma_s = params.upsample_radius as f64 / 2.0;
    for members in comps.iter().filter(|m| m.len() <= small_limit) {
        let fills: Vec<(usize, Option<f32>)> = members
            .par_iter()
            .map(|&idx| {
                let (x, y) = (idx % w, idx / w);
                let mut sum = 0.0f64;
                let mut wsum = 0.0f64;
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        if dx * dx + dy * dy > radius * radius {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let Some(v) = field.get(nx as usize, ny as usize) else {
                            continue;
                        };
                        let spatial =
                            (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_s * sigma_s)).exp();
                        let color = (-guide.dist_l1((x, y), (nx as usize, ny as usize))
                            * crate::image::COLOR_UNIT
                            / params.gamma_c)
                            .exp();
                        sum += spatial * color * v as f64;
                        wsum += spatial * color;
                    }
                }
                (idx, (wsum > 0.0).then(|| (sum / wsum) as f32))
            })
            .collect();
        for (idx, v) in fills {
            if let Some(v) = v {
                out.set(idx % w, idx / w, v);
            }
        }
    }

    // streak fill along scanlines: smaller of the nearest valid sides
    let mut rows_without_valid = Vec::new();
    for y in 0..h {
        let row_has_valid = (0..w).any(|x| out.is_valid(x, y));
        if !row_has_valid {
            rows_without_valid.push(y);
            continue;
        }
        let mut x = 0;
        while x < w {
            if out.is_valid(x, y) {
                x += 1;
                continue;
            }
            let run_start = x;
            while x < w && !out.is_valid(x, y) {
                x += 1;
            }
            let left = (run_start > 0).then(|| out.get(run_start - 1, y).unwrap());
            let right = (x < w).then(|| out.get(x, y).unwrap());
            let fill = match (left, right) {
                (Some(l), Some(r)) => l.min(r),
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => unreachable!("row has a valid pixel"),
            };
            for fx in run_start..x {
                out.set(fx, y, fill);
            }
        }
    }
    // rows with no valid pixel copy the nearest valid row
    for &y in &rows_without_valid {
        let mut source = None;
        for off in 1..h {
            if y >= off && !rows_without_valid.contains(&(y - off)) {
                source = Some(y - off);
                break;
            }
            if y + off < h && !rows_without_valid.contains(&(y + off)) {
                source = Some(y + off);
                break;
            }
        }
        if let Some(sy) = source {
            for x in 0..w {
                if let Some(v) = out.get(x, sy) {
                    out.set(x, y, v);
                }
            }
        }
    }
    let dense = out.valid_count() == w * h;
    (out, dense)
}

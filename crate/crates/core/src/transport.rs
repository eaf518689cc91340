//! Exact Wasserstein-1 cost between the positive and negative parts of a
//! mean-zero grid field, with the periodic Euclidean ground metric. This
//! is the Kantorovich-Rubinstein value sup { <f, psi> : f 1-Lipschitz },
//! solved as a transportation problem by successive shortest augmenting
//! paths with node potentials. Intended for small grids; cost grows as
//! (sources x sinks) per augmentation.

use crate::error::{CoreError, Result};
use crate::grid::GridField;

struct Instance {
    /// (cell index, mass > 0)
    sources: Vec<(usize, f64)>,
    sinks: Vec<(usize, f64)>,
    /// dist[i][j] between source i and sink j
    dist: Vec<Vec<f64>>,
}

fn build_instance(f: &GridField) -> Result<Option<Instance>> {
    let g = f.grid();
    let linf = f.linf();
    if f.mean().abs() > 1e-10 * linf.max(1e-30) {
        return Err(CoreError::InvalidParam {
            name: "psi",
            reason: format!("transport needs mean zero, got mean {:.3e}", f.mean()),
        });
    }
    if linf == 0.0 {
        return Ok(None);
    }
    let cell = g.cell();
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for (i, &v) in f.values().iter().enumerate() {
        if v > 0.0 {
            sources.push((i, v * cell));
        } else if v < 0.0 {
            sinks.push((i, -v * cell));
        }
    }
    if sources.is_empty() || sinks.is_empty() {
        return Ok(None);
    }
    // balance the tiny quadrature residue so the flow problem is feasible
    let supply: f64 = sources.iter().map(|s| s.1).sum();
    let demand: f64 = sinks.iter().map(|s| s.1).sum();
    let scale = supply / demand;
    for s in &mut sinks {
        s.1 *= scale;
    }
    let point = |i: usize| {
        let mut idx = [0usize; 3];
        g.unindex(i, &mut idx);
        (0..g.dim()).map(|ax| g.coord(idx[ax])).collect::<Vec<f64>>()
    };
    let src_pts: Vec<Vec<f64>> = sources.iter().map(|&(i, _)| point(i)).collect();
    let sink_pts: Vec<Vec<f64>> = sinks.iter().map(|&(i, _)| point(i)).collect();
    let dist = src_pts
        .iter()
        .map(|a| sink_pts.iter().map(|b| g.periodic_distance(a, b)).collect())
        .collect();
    Ok(Some(Instance {
        sources,
        sinks,
        dist,
    }))
}

/// W1(psi_plus, psi_minus) for a mean-zero field. Zero field gives 0.
pub fn w1_split(f: &GridField) -> Result<f64> {
    match build_instance(f)? {
        Some(inst) => solve(inst),
        None => Ok(0.0),
    }
}

fn solve(inst: Instance) -> Result<f64> {
    let ns = inst.sources.len();
    let nt = inst.sinks.len();
    let mut supply: Vec<f64> = inst.sources.iter().map(|s| s.1).collect();
    let mut demand: Vec<f64> = inst.sinks.iter().map(|s| s.1).collect();
    let total: f64 = supply.iter().sum();
    let tol = total * 1e-13;

    let mut flow = vec![vec![0.0f64; nt]; ns];
    // potentials: reduced cost dist[i][j] + pot_src[i] - pot_sink[j] >= 0
    let mut pot_src = vec![0.0f64; ns];
    let mut pot_sink = vec![0.0f64; nt];
    let mut remaining = total;
    let mut rounds = 0usize;
    let round_cap = 64 * (ns + nt) + 1024;

    while remaining > tol {
        rounds += 1;
        if rounds > round_cap {
            return Err(CoreError::NoConvergence(
                "transport",
                format!("augmentation cap {round_cap} hit, residual {remaining:.3e}"),
            ));
        }
        // Dijkstra over sources (0..ns) then sinks (ns..ns+nt)
        let nv = ns + nt;
        let inf = f64::INFINITY;
        let mut dist = vec![inf; nv];
        let mut prev = vec![usize::MAX; nv];
        let mut done = vec![false; nv];
        for (i, &s) in supply.iter().enumerate() {
            if s > tol {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = inf;
            for v in 0..nv {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < ns {
                let i = u;
                for j in 0..nt {
                    let rc = inst.dist[i][j] + pot_src[i] - pot_sink[j];
                    let nd = dist[u] + rc.max(0.0);
                    if nd < dist[ns + j] {
                        dist[ns + j] = nd;
                        prev[ns + j] = u;
                    }
                }
            } else {
                let j = u - ns;
                for i in 0..ns {
                    if flow[i][j] > 0.0 {
                        let rc = -inst.dist[i][j] - pot_src[i] + pot_sink[j];
                        let nd = dist[u] + rc.max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        // nearest sink with remaining demand
        let mut target = usize::MAX;
        let mut best = inf;
        for (j, &d) in demand.iter().enumerate() {
            if d > tol && dist[ns + j] < best {
                best = dist[ns + j];
                target = ns + j;
            }
        }
        if target == usize::MAX {
            return Err(CoreError::NoConvergence(
                "transport",
                format!("no augmenting path, residual {remaining:.3e}"),
            ));
        }
        // bottleneck along the path
        let mut amount = demand[target - ns];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= ns {
                // backward arc sink u -> source v
                amount = amount.min(flow[v][u - ns]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        // apply
        let start = v;
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < ns {
                flow[u][v - ns] += amount;
            } else {
                flow[v][u - ns] -= amount;
            }
            v = u;
        }
        supply[start] -= amount;
        demand[target - ns] -= amount;
        remaining -= amount;
        // potential update keeps reduced costs nonnegative
        let reach = best;
        for i in 0..ns {
            pot_src[i] += dist[i].min(reach);
        }
        for j in 0..nt {
            pot_sink[j] += dist[ns + j].min(reach);
        }
    }

    let mut cost = 0.0;
    for (frow, drow) in flow.iter().zip(&inst.dist) {
        for (fv, dv) in frow.iter().zip(drow) {
            cost += fv * dv;
        }
    }
    Ok(cost)
}

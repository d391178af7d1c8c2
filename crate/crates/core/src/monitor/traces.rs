use std::collections::BTreeSet;

use super::{ActionKey, MonitorFsm};

/// Every event sequence of length at most `max_len` that the FSM accepts from
/// its initial state.
///
/// This walks the graph directly, interleaving fork regions by shuffling their
/// runs, and shares no code with [`MonitorState`](super::MonitorState).
pub fn accepted_traces(fsm: &MonitorFsm, max_len: usize) -> BTreeSet<Vec<ActionKey>> {
    runs(fsm, fsm.initial, max_len)
        .into_iter()
        .map(|(t, _)| t)
        .collect()
}

type Run = (Vec<ActionKey>, bool);

/// Runs from `state`, each flagged with whether it ends the FSM.
fn runs(fsm: &MonitorFsm, state: usize, max: usize) -> BTreeSet<Run> {
    let st = &fsm.states[state];
    let mut out = BTreeSet::new();
    match &st.fork {
        None => {
            out.insert((Vec::new(), st.accepting));
        }
        Some(f) => {
            let per_region: Vec<Vec<Run>> = f
                .regions
                .iter()
                .map(|r| runs(r, r.initial, max).into_iter().collect())
                .collect();
            let mut choice = Vec::new();
            pick(&per_region, &mut choice, max, &mut |parts: &[&Run]| {
                let done = parts.iter().all(|(_, c)| *c);
                let seqs: Vec<&[ActionKey]> = parts.iter().map(|(t, _)| t.as_slice()).collect();
                let total: usize = seqs.iter().map(|s| s.len()).sum();
                for shuffled in shuffles(&seqs) {
                    if done {
                        for (tail, c) in runs(fsm, f.join, max - total) {
                            let mut t = shuffled.clone();
                            t.extend(tail);
                            out.insert((t, c));
                        }
                    } else {
                        out.insert((shuffled, false));
                    }
                }
            });
        }
    }
    if max > 0 {
        for e in &st.edges {
            for (tail, c) in runs(fsm, e.target, max - 1) {
                let mut t = vec![e.key.clone()];
                t.extend(tail);
                out.insert((t, c));
            }
        }
    }
    out
}

/// Calls `f` with one run per region whenever their total length fits.
fn pick<'a>(
    regions: &'a [Vec<Run>],
    chosen: &mut Vec<&'a Run>,
    budget: usize,
    f: &mut dyn FnMut(&[&Run]),
) {
    let Some((first, rest)) = regions.split_first() else {
        f(chosen);
        return;
    };
    for r in first {
        if r.0.len() <= budget {
            chosen.push(r);
            pick(rest, chosen, budget - r.0.len(), f);
            chosen.pop();
        }
    }
}

/// All interleavings of `seqs` that keep each sequence's own order.
fn shuffles(seqs: &[&[ActionKey]]) -> Vec<Vec<ActionKey>> {
    let live: Vec<usize> = (0..seqs.len()).filter(|&i| !seqs[i].is_empty()).collect();
    if live.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in live {
        let mut rest = seqs.to_vec();
        let head = rest[i][0].clone();
        rest[i] = &rest[i][1..];
        for mut tail in shuffles(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

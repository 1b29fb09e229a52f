use firecast_core::sim::{CellState, SimParams, SimState};

fn has_burning_neighbour(s: &SimState, x: usize, y: usize, r: usize) -> bool {
    let (w, h) = (s.width(), s.height());
    (y.saturating_sub(r)..=(y + r).min(h - 1)).any(|ny| {
        (x.saturating_sub(r)..=(x + r).min(w - 1)).any(|nx| s.states.get(nx, ny).is_burning())
    })
}

fn ever_burned(c: CellState) -> bool {
    matches!(c, CellState::Fire | CellState::Ember | CellState::BurnedOut)
}

/// Checks the step-to-step invariants of a recorded trajectory: no ignition
/// without a burning neighbour, embers lose exactly `q_die`, the ever-burned
/// set only grows, inert cells stay inert, and the run stops only at
/// extinction or at `max_steps`.
pub fn check_trajectory(traj: &[SimState], p: &SimParams) -> Result<(), String> {
    let last = traj.last().ok_or("empty trajectory")?;
    if last.has_burning() && last.step_index != p.max_steps {
        return Err(format!("stopped while burning at step {}", last.step_index));
    }
    if let Some(s) = traj[..traj.len() - 1].iter().find(|s| !s.has_burning()) {
        return Err(format!(
            "kept running after extinction at step {}",
            s.step_index
        ));
    }
    for pair in traj.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.step_index != a.step_index + 1 {
            return Err(format!(
                "step index jumped from {} to {}",
                a.step_index, b.step_index
            ));
        }
        for y in 0..a.height() {
            for x in 0..a.width() {
                let (sa, sb) = (*a.states.get(x, y), *b.states.get(x, y));
                let (qa, qb) = (*a.heat.get(x, y), *b.heat.get(x, y));
                let at = || format!("({x},{y}) at step {}", a.step_index);
                if ever_burned(sa) && !ever_burned(sb) {
                    return Err(format!("ever-burned set shrank at {}", at()));
                }
                match (sa, sb) {
                    (CellState::Tree, CellState::Fire)
                        if !has_burning_neighbour(a, x, y, p.radius_r) =>
                    {
                        return Err(format!("spontaneous ignition at {}", at()));
                    }
                    (CellState::Fire | CellState::Ember, CellState::Ember)
                        if qb != qa - p.q_die =>
                    {
                        return Err(format!("ember heat {qa} -> {qb} at {}", at()));
                    }
                    (CellState::Fire | CellState::Ember, CellState::BurnedOut)
                        if qa - p.q_die > 0.0 =>
                    {
                        return Err(format!("burned out with heat left at {}", at()));
                    }
                    (
                        CellState::Tree,
                        CellState::Ember | CellState::BurnedOut | CellState::Empty,
                    ) => {
                        return Err(format!("tree became {sb:?} at {}", at()));
                    }
                    (CellState::Fire, CellState::Fire | CellState::Tree) => {
                        return Err(format!("fire did not convert at {}", at()));
                    }
                    (CellState::Empty | CellState::BurnedOut, other) if other != sa => {
                        return Err(format!("inert cell became {other:?} at {}", at()));
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(())
}

use rmdp_lab::planner::*;
struct SmoothLineModel;
impl PlanModel for SmoothLineModel {
    fn num_actions(&self) -> usize { 3 }
    fn step(&mut self, state: &[f64], action: usize, next: &mut Vec<f64>) -> (f64, bool) {
        let dx = (action as f64 - 1.0) * 0.08;
        let x = (state[0] + dx).clamp(0.0, 1.0);
        next.clear(); next.push(x);
        (x * x, false)
    }
}
fn main() {
    let gamma = 0.9;
    for pts in [25usize, 40, 60] {
        let grid = RbfGrid::uniform(&[0.0], &[1.0], pts).unwrap();
        let fitted = fitted_value_iteration(&mut SmoothLineModel, &grid, gamma, 600, 1e-9).unwrap();
        // fine tabular oracle
        let n = 10 * pts;
        let coord = |i: usize| i as f64 / (n - 1) as f64;
        let snap = |x: f64| ((x * (n - 1) as f64).round() as usize).min(n - 1);
        let mut v = vec![0.0; n];
        for _ in 0..3000 {
            let mut nv = vec![0.0; n];
            for i in 0..n {
                let mut best = f64::NEG_INFINITY;
                for a in 0..3 {
                    let mut next = Vec::new();
                    let (r, _) = SmoothLineModel.step(&[coord(i)], a, &mut next);
                    let q = r + gamma * v[snap(next[0])];
                    if q > best { best = q; }
                }
                nv[i] = best;
            }
            v = nv;
        }
        let range = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut worst = 0.0f64;
        let mut max_eval = 0.0f64;
        for k in 0..fitted.num_centers() {
            let x = fitted.center(k)[0];
            let got = fitted.eval(&[x]);
            max_eval = max_eval.max(got.abs());
            worst = worst.max((got - v[snap(x)]).abs());
        }
        println!("pts={pts}: worst |fit-oracle| = {worst:.4} ({:.2}% of range {range:.3}), max|eval| = {max_eval:.4} vs bound {:.1}", 100.0*worst/range, 1.0/(1.0-gamma));
    }
}

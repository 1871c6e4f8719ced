//! Warmup tuning: dual-averaging step size and windowed diagonal metric.

/// Nesterov dual averaging of `log(step_size)` towards a target acceptance statistic.
#[derive(Clone, Debug)]
pub(super) struct StepSizeAdapter {
    target: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

const GAMMA: f64 = 0.05;
const T0: f64 = 10.0;
const KAPPA: f64 = 0.75;

impl StepSizeAdapter {
    pub(super) fn new(step_size: f64, target: f64) -> Self {
        let mut a = StepSizeAdapter {
            target,
            mu: 0.0,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        };
        a.restart(step_size);
        a
    }

    pub(super) fn restart(&mut self, step_size: f64) {
        self.mu = (10.0 * step_size).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    /// Records one acceptance statistic and returns the next step size.
    pub(super) fn update(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / GAMMA;
        let x_eta = self.counter.powf(-KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    pub(super) fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Schedules variance estimation windows inside warmup: a fast initial
/// buffer, doubling slow windows, then a fast terminal buffer.
#[derive(Clone, Debug)]
pub(super) struct MetricWindows {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window_end: usize,
    counter: usize,
    enabled: bool,
    estimator: Welford,
}

impl MetricWindows {
    pub(super) fn new(warmup: usize, dim: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut window_size) = (75, 50, 25);
        let enabled = warmup >= 20;
        if enabled && init_buffer + term_buffer + window_size > warmup {
            init_buffer = (0.15 * warmup as f64) as usize;
            term_buffer = (0.1 * warmup as f64) as usize;
            window_size = warmup - init_buffer - term_buffer;
        }
        MetricWindows {
            warmup,
            init_buffer,
            term_buffer,
            window_size,
            next_window_end: init_buffer + window_size - 1,
            counter: 0,
            enabled,
            estimator: Welford::new(dim),
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.warmup - self.term_buffer
            && self.counter != self.warmup
    }

    fn at_window_end(&self) -> bool {
        self.counter == self.next_window_end && self.counter != self.warmup
    }

    fn advance_window(&mut self) {
        let last = self.warmup - self.term_buffer - 1;
        if self.next_window_end == last {
            return;
        }
        self.window_size *= 2;
        self.next_window_end = self.counter + self.window_size;
        if self.next_window_end != last && self.next_window_end + 2 * self.window_size > last {
            self.next_window_end = last;
        }
    }

    /// Records a warmup position; returns a new inverse metric at the end of a window.
    pub(super) fn observe(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if !self.enabled {
            return None;
        }
        if self.in_window() {
            self.estimator.add(q);
        }
        let mut update = None;
        if self.at_window_end() {
            self.advance_window();
            let n = self.estimator.count as f64;
            let regularised = self
                .estimator
                .variance()
                .into_iter()
                .map(|v| (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0)))
                .collect();
            self.estimator = Welford::new(q.len());
            update = Some(regularised);
        }
        self.counter += 1;
        update
    }
}

#[derive(Clone, Debug)]
struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Welford {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x[i] - self.mean[i]);
        }
    }

    fn variance(&self) -> Vec<f64> {
        let denom = (self.count as f64 - 1.0).max(1.0);
        self.m2.iter().map(|m| m / denom).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_ends(warmup: usize) -> Vec<usize> {
        let mut w = MetricWindows::new(warmup, 1);
        (0..warmup).filter(|_| w.observe(&[0.0]).is_some()).collect()
    }

    #[test]
    fn default_schedule() {
        // 75 fast, slow windows 25, 50, 100, 200, 500 (last stretched), 50 fast
        assert_eq!(window_ends(1000), vec![99, 149, 249, 449, 949]);
    }

    #[test]
    fn short_warmup_uses_proportional_buffers() {
        assert_eq!(window_ends(100), vec![89]);
        assert!(window_ends(10).is_empty());
    }

    #[test]
    fn variance_is_regularised() {
        let mut w = MetricWindows::new(1000, 1);
        let mut last = None;
        for i in 0..100 {
            let x = if i % 2 == 0 { 1.0 } else { -1.0 };
            if let Some(v) = w.observe(&[x]) {
                last = Some(v);
            }
        }
        // 25 samples from the window, alternating +-1
        let n = 25.0;
        let var: f64 = {
            let xs: Vec<f64> = (75..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let m = xs.iter().sum::<f64>() / n;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
        };
        let expected = n / (n + 5.0) * var + 1e-3 * 5.0 / (n + 5.0);
        assert!((last.unwrap()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_averaging_shrinks_step_when_acceptance_is_low() {
        let mut a = StepSizeAdapter::new(1.0, 0.8);
        let mut eps = 1.0;
        for _ in 0..200 {
            eps = a.update(0.1);
        }
        assert!(eps < 1e-3);
        let mut a = StepSizeAdapter::new(1.0, 0.8);
        for _ in 0..200 {
            eps = a.update(1.0);
        }
        assert!(eps > 1.0);
    }
}

use std::fmt;
use std::sync::Arc;

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Closed-form scalar function of `(t, x₁, …, x_d)`, optionally with its
/// analytic space-time gradient.
#[derive(Clone)]
pub struct ScalarField {
    value: ValueFn,
    gradient: Option<GradientFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c).with_gradient(|p| vec![0.0; p.len()])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    #[inline]
    pub fn eval(&self, p: &[f64]) -> f64 {
        (self.value)(p)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Analytic gradient if declared, else central differences with step `1e−6`.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g(p),
            None => self.fd_gradient(p, 1e-6),
        }
    }

    pub fn fd_gradient(&self, p: &[f64], h: f64) -> Vec<f64> {
        let mut q = p.to_vec();
        (0..p.len())
            .map(|k| {
                q[k] = p[k] + h;
                let fp = self.eval(&q);
                q[k] = p[k] - h;
                let fm = self.eval(&q);
                q[k] = p[k];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    /// Largest deviation between the declared gradient and central
    /// differences, relative to `max(1, |∇f|)`, over `points`.
    pub fn gradient_check(&self, points: &[Vec<f64>], h: f64) -> f64 {
        let Some(g) = &self.gradient else {
            return 0.0;
        };
        points
            .iter()
            .map(|p| {
                let a = g(p);
                let fd = self.fd_gradient(p, h);
                let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                a.iter().zip(&fd).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
            })
            .fold(0.0, f64::max)
    }
}

impl<F> From<F> for ScalarField
where
    F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    fn from(f: F) -> Self {
        Self::new(f)
    }
}

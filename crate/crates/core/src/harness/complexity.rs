use std::fmt;

use super::config::ScenarioConfig;
use crate::agent::network_widths;
use crate::env::ActionLayout;
use crate::error::Result;

/// `Σ_ℓ ν_ℓ ν_{ℓ+1}` over consecutive layer widths (weights only).
pub fn complexity_sum(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1]).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkComplexity {
    pub name: &'static str,
    pub widths: Vec<usize>,
    pub weights: usize,
    pub biases: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityReport {
    pub state_dim: usize,
    pub action_dim: usize,
    pub networks: Vec<NetworkComplexity>,
}

impl ComplexityReport {
    /// Sum over actor, critic and meta-critic.
    pub fn total(&self) -> usize {
        self.networks.iter().map(|n| n.weights).sum()
    }
}

pub fn complexity_report(config: &ScenarioConfig) -> Result<ComplexityReport> {
    config.validate()?;
    let layout = ActionLayout::from_config(config);
    let (state_dim, action_dim) = (layout.state_layout().len(), layout.dim());
    let [actor, critic, meta] = network_widths(state_dim, action_dim, &config.agent);
    let mut nets = vec![("actor", actor), ("critic", critic)];
    if config.agent.meta_critic {
        nets.push(("meta_critic", meta));
    }
    let networks = nets
        .into_iter()
        .map(|(name, widths)| NetworkComplexity {
            name,
            weights: complexity_sum(&widths),
            biases: widths[1..].iter().sum(),
            widths,
        })
        .collect();
    Ok(ComplexityReport { state_dim, action_dim, networks })
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "state_dim  {}", self.state_dim)?;
        writeln!(f, "action_dim {}", self.action_dim)?;
        writeln!(f, "{:<12} {:>12} {:>10}  widths", "network", "sum(v*v')", "biases")?;
        for n in &self.networks {
            let widths: Vec<String> = n.widths.iter().map(usize::to_string).collect();
            writeln!(f, "{:<12} {:>12} {:>10}  [{}]", n.name, n.weights, n.biases, widths.join(", "))?;
        }
        write!(f, "{:<12} {:>12}", "total", self.total())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sums() {
        assert_eq!(complexity_sum(&[4, 8, 2]), 48);
        assert_eq!(complexity_sum(&[5, 3]), 15);
        assert_eq!(complexity_sum(&[7]), 0);
    }

    #[test]
    fn reference_dims() {
        let r = complexity_report(&ScenarioConfig::default()).unwrap();
        assert_eq!(r.state_dim, 1441);
        assert_eq!(r.networks.len(), 3);
        assert_eq!(r.networks[0].widths, vec![1441, 256, 256, 2 * r.action_dim]);
    }
}

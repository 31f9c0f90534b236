//! Built-in benchmark configurations.

use crate::config::{parse_config, ProblemConfig};
use crate::error::{Error, Result};

const EXAMPLE1: &str = r#"# Bypass: two inlet and two outlet channels, energy dissipation.
[geometry]
xmin = 0
xmax = 1.8
ymin = -0.5
ymax = 0.5
nx = 150
ny = 125
inlet = "x < 1e-9 and abs(abs(y) - 0.35) < 0.15 - 1e-9"
outlet = "x > 1.8 - 1e-9 and abs(abs(y) - 0.35) < 0.15 - 1e-9"

[physics]
re = 13.69
pe = 1
alpha0 = 100

[optim]
objective_mode = "dissipation"
beta1 = 1
beta2 = 0
beta3 = 350
v0 = 1.25
kappa = 0.005
tau = 0.001
eta = 75
iterations = 40
substeps = 3

[boundary]
# parabola on each inlet band
u0x = "20*(0.15 - abs(abs(y) - 0.35))*(0.15 + abs(abs(y) - 0.35))"
initial_phi = "min(abs(y - 0.35) - 0.15, abs(y + 0.35) - 0.15)"

[output]
dir = "out/example1"
"#;

const EXAMPLE2: &str = r#"# Diffuser: full-height inlet, narrow outlet, energy dissipation.
[geometry]
xmin = 0
xmax = 1
ymin = -0.5
ymax = 0.5
nx = 150
ny = 125
inlet = "x < 1e-9"
outlet = "x > 1 - 1e-9 and abs(y) < 0.25 - 1e-9"

[physics]
re = 13.69
pe = 1
alpha0 = 100

[optim]
objective_mode = "dissipation"
beta1 = 1
beta2 = 0
beta3 = 600
v0 = 0.35
kappa = 0.005
tau = 0.005
eta = 75
iterations = 40
substeps = 3

[boundary]
u0x = "2*(1 - y)*(1 + y)"
initial_phi = "min(abs(y - 0.45) - 0.225, abs(y + 0.45) - 0.225)"

[output]
dir = "out/example2"
"#;

const EXAMPLE3: &str = r#"# Pipe bend: inlet on the upper left, outlet on the lower right.
[geometry]
xmin = 0
xmax = 1
ymin = 0
ymax = 1
nx = 150
ny = 125
inlet = "x < 1e-9 and y > 0.5 + 1e-9 and y < 0.85 - 1e-9"
outlet = "y < 1e-9 and x > 0.5 + 1e-9 and x < 0.85 - 1e-9"

[physics]
re = 13.69
pe = 1
alpha0 = 100

[optim]
objective_mode = "dissipation"
beta1 = 1
beta2 = 0
beta3 = 600
v0 = 0.78
kappa = 0.005
tau = 0.0005
eta = 75
iterations = 40
substeps = 3

[boundary]
u0x = "10*(0.85 - y)*(y - 0.5)"
initial_phi = "1 - abs(x + y - 1)"

[output]
dir = "out/example3"
"#;

const EXAMPLE5: &str = r#"# Passive mixer in a 4 x 1 channel.
[geometry]
xmin = 0
xmax = 4
ymin = 0
ymax = 1
nx = 200
ny = 100
inlet = "x < 1e-9"
outlet = "x > 4 - 1e-9"

[physics]
re = 1
pe = 300
alpha0 = 800

[optim]
objective_mode = "mixing"
beta1 = 0
beta2 = 1
beta3 = 20
v0 = 0.46875
kappa = 0.001
tau = 0.0008
eta = 2
iterations = 100
substeps = 10

[boundary]
u0x = "0.2*y*(1 - y)"
c0 = "if(y < 0.5, 0, 1)"
cd = 0.5
initial_phi = "if(x < 0.5 or x > 3.625, 1, 1 - (0.5*cos(4*pi*x)*cos(2*pi*y + pi/2) + 0.15))"
fixed_fluid = "x < 0.5 - 1e-9 or x > 3.625 + 1e-9"

[output]
dir = "out/example5"
"#;

const EXAMPLE6: &str = r#"# Passive mixer in a 2.5 x 1 channel.
[geometry]
xmin = 0
xmax = 2.5
ymin = 0
ymax = 1
nx = 125
ny = 50
inlet = "x < 1e-9"
outlet = "x > 2.5 - 1e-9"

[physics]
re = 1
pe = 300
alpha0 = 800

[optim]
objective_mode = "mixing"
beta1 = 0
beta2 = 1
beta3 = 20
v0 = 0.28125
kappa = 0.001
tau = 0.0008
eta = 2
iterations = 100
substeps = 10

[boundary]
u0x = "0.2*y*(1 - y)"
c0 = "if(y < 0.5, 0, 1)"
cd = 0.5
initial_phi = "if(x < 0.5 or x > 2.125, 1, 1 - (0.5*cos(4*pi*x)*cos(2*pi*y + pi/2) + 0.15))"
fixed_fluid = "x < 0.5 - 1e-9 or x > 2.125 + 1e-9"

[output]
dir = "out/example6"
"#;

const EXAMPLE7: &str = r#"# Electrokinetic mixer: segmented wall electrodes drive the flow.
[geometry]
xmin = 0
xmax = 4
ymin = 0
ymax = 1
nx = 200
ny = 100
inlet = "x < 1e-9"
outlet = "x > 4 - 1e-9"
# electrode segments split at x = 1, 2, 3
segment = "floor(x)"

[physics]
re = 1
pe = 300
alpha0 = 800
eps0 = 3.6
eps_m = 0.01
rho0 = 1.8

[optim]
objective_mode = "mixing_electro"
beta1 = 0
beta2 = 1
beta3 = 20
v0 = 0.46875
kappa = 0.001
tau = 0.0008
eta = 2
iterations = 100
substeps = 10

[boundary]
u0x = "0.2*y*(1 - y)"
psi_inlet = "0.1*y*(1 - y)^2*sin(pi*y)"
# driven electrodes: even segments on the top wall, odd ones on the bottom
psi_wall = "if(y > 0.5, 1 - seg + 2*floor(seg/2), seg - 2*floor(seg/2))*0.7*(x - 0.5)*(x - 1)*(x - 2)*(x - 3)*(x - 29/8)*sin(pi*x)"
c0 = "if(y < 0.5, 0, 1)"
cd = 0.5
initial_phi = "if(x < 0.5 or x > 3.625, 1, 1 - (0.5*cos(4*pi*x)*cos(2*pi*y + pi/2) + 0.15))"
fixed_fluid = "x < 0.5 - 1e-9 or x > 3.625 + 1e-9"

[output]
dir = "out/example7"
"#;

const ENTRIES: [(&str, &str); 6] = [
    ("example1", EXAMPLE1),
    ("example2", EXAMPLE2),
    ("example3", EXAMPLE3),
    ("example5", EXAMPLE5),
    ("example6", EXAMPLE6),
    ("example7", EXAMPLE7),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|e| e.0)
}

/// Source document of a built-in example.
pub fn document(name: &str) -> Option<&'static str> {
    ENTRIES.iter().find(|e| e.0 == name).map(|e| e.1)
}

pub fn load(name: &str) -> Result<ProblemConfig> {
    let doc = document(name).ok_or_else(|| {
        Error::Config(format!("unknown example `{name}`; available: {}", names().collect::<Vec<_>>().join(", ")))
    })?;
    parse_config(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_parses() {
        for name in names() {
            let cfg = load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = parse_config(&cfg.to_document()).unwrap();
            assert_eq!(cfg, again, "{name}");
        }
        assert!(load("example4").is_err());
    }

    #[test]
    fn example5_parameters() {
        let c = load("example5").unwrap();
        assert_eq!((c.physics.re, c.physics.pe, c.physics.alpha0), (1.0, 300.0, 800.0));
        assert_eq!((c.optim.tau, c.optim.kappa, c.optim.eta), (8e-4, 1e-3, 2.0));
        assert_eq!((c.optim.v0, c.optim.beta3), (15.0 / 32.0, 20.0));
        assert_eq!((c.optim.substeps, c.optim.iterations), (10, 100));
    }

    #[test]
    fn example1_parameters() {
        let c = load("example1").unwrap();
        assert_eq!(c.physics.re, 13.69);
        assert_eq!((c.optim.kappa, c.optim.tau, c.optim.eta), (5e-3, 1e-3, 75.0));
        assert_eq!((c.optim.beta3, c.optim.iterations, c.optim.v0), (350.0, 40, 1.25));
    }
}

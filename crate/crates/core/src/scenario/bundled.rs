use super::{ConfigError, Scenario};

/// A scenario shipped inside the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BundledScenario {
    pub name: &'static str,
    pub source: &'static str,
}

impl BundledScenario {
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        Scenario::from_json(self.source)
    }
}

macro_rules! entry {
    ($name:literal) => {
        BundledScenario {
            name: $name,
            source: include_str!(concat!("../../scenarios/", $name, ".json")),
        }
    };
}

const BUNDLED: &[BundledScenario] = &[
    entry!("abelian3"),
    entry!("affine2d"),
    entry!("bates"),
    entry!("chern_bismut_flat"),
    entry!("conformal_r2"),
    entry!("cross3"),
    entry!("cross7"),
    entry!("einstein_s2"),
    entry!("ellipsoid"),
    entry!("golab_hermitian"),
    entry!("golab_r2"),
    entry!("halphen"),
    entry!("heisenberg"),
    entry!("kahler_flat_q"),
    entry!("lck_r4"),
    entry!("lyra_r2"),
    entry!("nabla_j_diag"),
    entry!("paraboloid"),
    entry!("paraboloid_shape"),
    entry!("ricci_sphere"),
    entry!("selfadjoint_constant"),
    entry!("selfadjoint_recurrent"),
    entry!("selfadjoint_warped"),
    entry!("so3"),
    entry!("sphere"),
    entry!("subgeodesic_dual"),
    entry!("subgeodesic_projective"),
    entry!("subgeodesic_rigid"),
];

/// All bundled scenarios, sorted by name.
pub fn bundled() -> &'static [BundledScenario] {
    BUNDLED
}

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|b| b.name).collect()
}

pub fn find_bundled(name: &str) -> Option<&'static BundledScenario> {
    BUNDLED.iter().find(|b| b.name == name)
}

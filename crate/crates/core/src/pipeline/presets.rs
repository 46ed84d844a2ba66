use crate::model::{LossKind, ModelConfig, TrainConfig};

/// Per-task hyperparameters selectable by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskPreset {
    pub name: &'static str,
    /// Dataset key holding the regression target.
    pub target: &'static str,
    pub unit: &'static str,
    pub fusion_layers: usize,
    pub learning_rate: f64,
    pub loss_kind: LossKind,
}

const PRESETS: [TaskPreset; 2] = [
    TaskPreset {
        name: "band_gap",
        target: "band_gap",
        unit: "eV",
        fusion_layers: 8,
        learning_rate: 5e-4,
        loss_kind: LossKind::L1,
    },
    TaskPreset {
        name: "formation_energy",
        target: "formation_energy",
        unit: "eV/atom",
        fusion_layers: 4,
        learning_rate: 7e-4,
        loss_kind: LossKind::Mse,
    },
];

pub fn task_preset(name: &str) -> Option<&'static TaskPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Copies the preset's values onto the given configs, leaving every other
/// field for the user to override.
pub fn apply_preset(preset: &TaskPreset, model: &mut ModelConfig, train: &mut TrainConfig) {
    model.num_fusion_layers = preset.fusion_layers;
    train.learning_rate = preset.learning_rate;
    train.loss_kind = preset.loss_kind;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_gap_preset_values() {
        let p = task_preset("band_gap").unwrap();
        let mut model = ModelConfig::default();
        let mut train = TrainConfig::default();
        apply_preset(p, &mut model, &mut train);
        assert_eq!(model.num_fusion_layers, 8);
        assert_eq!(train.learning_rate, 5e-4);
        assert_eq!(train.loss_kind, LossKind::L1);
        assert_eq!(p.unit, "eV");
    }

    #[test]
    fn formation_energy_preset_values() {
        let p = task_preset("formation_energy").unwrap();
        let mut model = ModelConfig::default();
        let mut train = TrainConfig::default();
        apply_preset(p, &mut model, &mut train);
        assert_eq!(model.num_fusion_layers, 4);
        assert_eq!(train.learning_rate, 7e-4);
        assert_eq!(train.loss_kind, LossKind::Mse);
        assert_eq!(p.unit, "eV/atom");
    }

    #[test]
    fn unknown_preset_is_none() {
        assert!(task_preset("bulk_modulus").is_none());
    }
}

//! Motion-primitive registry and the two-mode controller state machine.
//!
//! Low-level primitives map confirmed gestures to incremental TCP motions;
//! the high-level `Ring` primitive switches the controller from teleop into
//! cooperation. One action is emitted per gate confirmation: the caller
//! flushes the gate after acting, so a held gesture produces a stepwise
//! series of increments rather than a continuous stream.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use crate::dataset::MotionClass;
use crate::geom::Vec3;

/// Default incremental displacement per confirmed Come/Back command.
pub const DEFAULT_STEP_M: f64 = 0.020;

#[derive(Debug, Error)]
pub enum FsmError {
    #[error("class {0} is not registered")]
    UnregisteredClass(MotionClass),
    #[error("registry config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Incremental TCP motion: translation plus an axis-angle rotation vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub translation: Vec3,
    pub rotation: Vec3,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement {
        translation: Vec3::ZERO,
        rotation: Vec3::ZERO,
    };

    pub fn translate(translation: Vec3) -> Displacement {
        Displacement {
            translation,
            rotation: Vec3::ZERO,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.translation == Vec3::ZERO && self.rotation == Vec3::ZERO
    }
}

/// What a registered class does when confirmed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BindingAction {
    /// Low level: a fixed incremental motion.
    Incremental(Displacement),
    /// High level: switch the controller into cooperation mode.
    EnterCooperation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingLevel {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveBinding {
    pub class: MotionClass,
    pub level: BindingLevel,
    pub action: BindingAction,
}

/// Class -> binding table.
#[derive(Debug, Clone, Default)]
pub struct PrimitiveRegistry {
    bindings: BTreeMap<MotionClass, PrimitiveBinding>,
}

impl PrimitiveRegistry {
    pub fn insert(&mut self, binding: PrimitiveBinding) {
        self.bindings.insert(binding.class, binding);
    }

    pub fn lookup(&self, class: MotionClass) -> Option<&PrimitiveBinding> {
        self.bindings.get(&class)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Parse a registry from text, one binding per line:
    ///
    /// ```text
    /// keep, low,  0, 0, 0
    /// come, low,  0, 0.02, 0
    /// back, low,  0, -0.02, 0
    /// ring, high, cooperate
    /// ```
    ///
    /// Low-level lines carry dx,dy,dz (meters) and optionally ax,ay,az
    /// (axis-angle radians); high-level lines carry a directive.
    pub fn from_reader<R: std::io::Read>(r: R) -> Result<PrimitiveRegistry, FsmError> {
        let mut registry = PrimitiveRegistry::default();
        for (lineno, line) in std::io::BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let at = |i: usize| -> Result<&str, FsmError> {
                fields.get(i).copied().ok_or_else(|| {
                    FsmError::Config(format!("line {}: missing field {}", lineno + 1, i + 1))
                })
            };
            let class = MotionClass::from_name(at(0)?)
                .map_err(|e| FsmError::Config(format!("line {}: {e}", lineno + 1)))?;
            let level = at(1)?;
            let binding = match level {
                "low" => {
                    let num = |i: usize| -> Result<f64, FsmError> {
                        at(i)?
                            .parse()
                            .map_err(|e| FsmError::Config(format!("line {}: {e}", lineno + 1)))
                    };
                    let translation = Vec3::new(num(2)?, num(3)?, num(4)?);
                    let rotation = if fields.len() > 5 {
                        Vec3::new(num(5)?, num(6)?, num(7)?)
                    } else {
                        Vec3::ZERO
                    };
                    PrimitiveBinding {
                        class,
                        level: BindingLevel::Low,
                        action: BindingAction::Incremental(Displacement {
                            translation,
                            rotation,
                        }),
                    }
                }
                "high" => {
                    if at(2)? != "cooperate" {
                        return Err(FsmError::Config(format!(
                            "line {}: unknown directive {:?}",
                            lineno + 1,
                            at(2)?
                        )));
                    }
                    PrimitiveBinding {
                        class,
                        level: BindingLevel::High,
                        action: BindingAction::EnterCooperation,
                    }
                }
                other => {
                    return Err(FsmError::Config(format!(
                        "line {}: unknown level {other:?}",
                        lineno + 1
                    )))
                }
            };
            registry.insert(binding);
        }
        Ok(registry)
    }

    pub fn from_file(path: &Path) -> Result<PrimitiveRegistry, FsmError> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}

/// The four default bindings: Keep holds, Come/Back step ±20 mm along y,
/// Ring enters cooperation.
pub fn default_bindings() -> PrimitiveRegistry {
    let mut registry = PrimitiveRegistry::default();
    registry.insert(PrimitiveBinding {
        class: MotionClass::Keep,
        level: BindingLevel::Low,
        action: BindingAction::Incremental(Displacement::ZERO),
    });
    registry.insert(PrimitiveBinding {
        class: MotionClass::Come,
        level: BindingLevel::Low,
        action: BindingAction::Incremental(Displacement::translate(Vec3::new(
            0.0,
            DEFAULT_STEP_M,
            0.0,
        ))),
    });
    registry.insert(PrimitiveBinding {
        class: MotionClass::Back,
        level: BindingLevel::Low,
        action: BindingAction::Incremental(Displacement::translate(Vec3::new(
            0.0,
            -DEFAULT_STEP_M,
            0.0,
        ))),
    });
    registry.insert(PrimitiveBinding {
        class: MotionClass::Ring,
        level: BindingLevel::High,
        action: BindingAction::EnterCooperation,
    });
    registry
}

/// Controller mode; transitions only ever move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ControllerMode {
    Teleop,
    Cooperation,
    Done,
}

/// One confirmed-decision step of the mode machine.
///
/// In teleop a confirmed low-level class emits its displacement verbatim and
/// a confirmed `Ring` switches to cooperation (emitting nothing; a mode
/// transition never carries an action). In cooperation and done, confirmed
/// classes are ignored. `None` always emits nothing and preserves the mode.
pub fn step_fsm(
    mode: ControllerMode,
    confirmed: Option<MotionClass>,
    registry: &PrimitiveRegistry,
) -> Result<(ControllerMode, Option<Displacement>), FsmError> {
    let Some(class) = confirmed else {
        return Ok((mode, None));
    };
    let binding = registry
        .lookup(class)
        .ok_or(FsmError::UnregisteredClass(class))?;
    match mode {
        ControllerMode::Teleop => match binding.action {
            BindingAction::Incremental(d) => Ok((ControllerMode::Teleop, Some(d))),
            BindingAction::EnterCooperation => Ok((ControllerMode::Cooperation, None)),
        },
        ControllerMode::Cooperation | ControllerMode::Done => Ok((mode, None)),
    }
}

/// Called by the cooperation controller when the object has been released.
pub fn complete_cooperation(mode: ControllerMode) -> ControllerMode {
    match mode {
        ControllerMode::Cooperation => ControllerMode::Done,
        other => other,
    }
}

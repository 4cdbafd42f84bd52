use super::model::blended_derivatives;
use super::{speed_controller, ControlInput, SimError, VehicleModel, VehicleState};

/// Advance one control period.
///
/// The command is held for `dt_ctrl`; the steering actuator moves toward
/// `cmd.delta` at most `delta_rate_max * dt_phys` per physics step and the
/// speed controller is evaluated at every RK4 stage. Returns the new state and
/// the actual steering angle.
pub fn step_integrate(
    model: &VehicleModel,
    state: &VehicleState,
    delta_actual: f64,
    cmd: ControlInput,
    dt_ctrl: f64,
    dt_phys: f64,
    mu: f64,
) -> Result<(VehicleState, f64), SimError> {
    let n = substeps(dt_ctrl, dt_phys)?;
    let lim = &model.limits;
    let cmd = cmd.clamped(lim);
    let max_step = lim.delta_rate_max * dt_phys;
    let mut delta = delta_actual;
    let mut x = state.to_array();
    for _ in 0..n {
        delta += (cmd.delta - delta).clamp(-max_step, max_step);
        x = rk4(x, dt_phys, |y| {
            let s = VehicleState::from_array(*y);
            let a = speed_controller(cmd.v, s.vx, lim);
            blended_derivatives(model, &s, delta, a, mu)
        });
    }
    let out = VehicleState::from_array(x);
    if !out.is_finite() || !delta.is_finite() {
        return Err(SimError::NonFinite);
    }
    Ok((out, delta))
}

fn substeps(dt_ctrl: f64, dt_phys: f64) -> Result<usize, SimError> {
    if !(dt_ctrl > 0.0) || !(dt_phys > 0.0) {
        return Err(SimError::StepMismatch { dt_ctrl, dt_phys });
    }
    let n = (dt_ctrl / dt_phys).round();
    if n < 1.0 || (n * dt_phys - dt_ctrl).abs() > 1e-9 * dt_ctrl.max(1.0) {
        return Err(SimError::StepMismatch { dt_ctrl, dt_phys });
    }
    Ok(n as usize)
}

pub(crate) fn rk4<F: Fn(&[f64; 6]) -> [f64; 6]>(x: [f64; 6], h: f64, f: F) -> [f64; 6] {
    let add = |a: &[f64; 6], b: &[f64; 6], c: f64| -> [f64; 6] { std::array::from_fn(|i| a[i] + c * b[i]) };
    let k1 = f(&x);
    let k2 = f(&add(&x, &k1, h / 2.0));
    let k3 = f(&add(&x, &k2, h / 2.0));
    let k4 = f(&add(&x, &k3, h));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Stateful wrapper holding the vehicle state, steering actuator and friction.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: VehicleModel,
    pub state: VehicleState,
    pub delta: f64,
    pub mu: f64,
    pub dt_ctrl: f64,
    pub dt_phys: f64,
}

impl Simulator {
    pub fn new(model: VehicleModel, mu: f64, dt_ctrl: f64, dt_phys: f64) -> Result<Self, SimError> {
        model.validate()?;
        substeps(dt_ctrl, dt_phys)?;
        if !(mu > 0.0) {
            return Err(SimError::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        Ok(Simulator { model, state: VehicleState::default(), delta: 0.0, mu, dt_ctrl, dt_phys })
    }

    pub fn reset(&mut self, state: VehicleState, mu: f64) {
        self.state = state;
        self.delta = 0.0;
        self.mu = mu;
    }

    pub fn step(&mut self, cmd: ControlInput) -> Result<VehicleState, SimError> {
        let (s, d) = step_integrate(&self.model, &self.state, self.delta, cmd, self.dt_ctrl, self.dt_phys, self.mu)?;
        self.state = s;
        self.delta = d;
        Ok(s)
    }
}

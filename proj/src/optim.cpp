#include "noiseproto/optim.hpp"

#include <cmath>

#include "noiseproto/error.hpp"

namespace noiseproto {

void adam_step(Matrix& params, const Matrix& grads, AdamState& state, double lr) {
    if (!params.same_shape(grads) || !params.same_shape(state.m)) {
        throw shape_error("adam_step: parameter/gradient/state shapes disagree for '" +
                          state.name + "'");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    auto& p = params.data();
    const auto& g = grads.data();
    auto& m = state.m.data();
    auto& v = state.v.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(g[i])) {
            throw numeric_error("adam_step: non-finite gradient for '" + state.name +
                                "' at flat index " + std::to_string(i));
        }
        const double gi = g[i] + state.weight_decay * p[i];
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

LrSchedule LrSchedule::step(double initial, double factor, std::size_t period,
                            std::size_t total) {
    LrSchedule s;
    s.kind = ScheduleKind::step_decay;
    s.initial = initial;
    s.decay_factor = factor;
    s.decay_period = period;
    s.total_steps = total;
    s.final_rate = initial;
    s.validate();
    return s;
}

LrSchedule LrSchedule::cosine(double initial, double final_rate, std::size_t total) {
    LrSchedule s;
    s.kind = ScheduleKind::cosine_anneal;
    s.initial = initial;
    s.final_rate = final_rate;
    s.total_steps = total;
    s.validate();
    return s;
}

void LrSchedule::validate() const {
    if (!(initial > 0.0)) throw config_error("lr schedule: initial rate must be positive");
    if (total_steps == 0) throw config_error("lr schedule: total steps must be >= 1");
    if (kind == ScheduleKind::step_decay) {
        if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
            throw config_error("lr schedule: decay factor must be in (0, 1]");
        }
        if (decay_period == 0) throw config_error("lr schedule: decay period must be >= 1");
    } else {
        if (!(final_rate > 0.0 && final_rate <= initial)) {
            throw config_error("lr schedule: final rate must be in (0, initial]");
        }
    }
}

double schedule_rate(const LrSchedule& s, std::size_t step) {
    if (s.kind == ScheduleKind::step_decay) {
        return s.initial * std::pow(s.decay_factor, static_cast<double>(step / s.decay_period));
    }
    if (step >= s.total_steps) return s.final_rate;
    const double phase = 3.14159265358979323846 * static_cast<double>(step) /
                         static_cast<double>(s.total_steps);
    return s.final_rate + (s.initial - s.final_rate) * 0.5 * (1.0 + std::cos(phase));
}

}  // namespace noiseproto

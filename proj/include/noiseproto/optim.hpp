#pragma once

#include <cstdint>
#include <string>

#include "noiseproto/matrix.hpp"

namespace noiseproto {

// Adam moment buffers for one parameter matrix.
struct AdamState {
    explicit AdamState(const Matrix& param, std::string param_name = "param",
                       double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                       double weight_decay = 0.0)
        : m(param.rows(), param.cols()),
          v(param.rows(), param.cols()),
          beta1(beta1),
          beta2(beta2),
          eps(eps),
          weight_decay(weight_decay),
          name(std::move(param_name)) {}

    Matrix m;  // first-moment estimate
    Matrix v;  // second-moment estimate
    std::uint64_t step = 0;
    double beta1;
    double beta2;
    double eps;
    double weight_decay;
    std::string name;
};

// One Adam update with bias correction. Weight decay is added into the
// gradient as a plain L2 term before the moment updates.
void adam_step(Matrix& params, const Matrix& grads, AdamState& state, double lr);

enum class ScheduleKind { step_decay, cosine_anneal };

struct LrSchedule {
    ScheduleKind kind = ScheduleKind::step_decay;
    double initial = 0.1;
    double decay_factor = 0.1;      // step_decay only
    std::size_t decay_period = 30;  // step_decay only
    double final_rate = 0.001;      // cosine_anneal only
    std::size_t total_steps = 100;

    static LrSchedule step(double initial, double factor, std::size_t period,
                           std::size_t total);
    static LrSchedule cosine(double initial, double final_rate, std::size_t total);

    void validate() const;  // throws config_error
};

// Rate at a given step. Steps at or past total_steps keep decaying
// (step_decay) or hold the final rate (cosine_anneal).
double schedule_rate(const LrSchedule& s, std::size_t step);

}  // namespace noiseproto

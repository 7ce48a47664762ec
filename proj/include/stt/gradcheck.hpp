#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stt/tensor.hpp"

namespace stt {

// Relative error guarded against vanishing gradients: below the floor the
// comparison degrades to an absolute tolerance.
double guarded_rel_err(double analytic, double reference);

// Worst guarded relative error between backward() and central finite
// differences, over every coordinate of every listed parameter. `build`
// must reconstruct the scalar loss from the parameters' current values.
double max_grad_rel_err(const std::vector<Tensor>& params,
                        const std::function<Tensor(Graph&)>& build, double h = 1e-5,
                        double corrupt_by = 0.0);

struct GradCheckGroup {
    std::string name;
    double worst_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double tolerance = 1e-5;
    bool all_pass() const;
};

// Full verification sweep over the tensor ops, the model streams, the
// losses, and the assembled model with the joint objective. `corrupt`
// injects a fault into the first group (test hook).
GradCheckReport run_gradcheck(unsigned long long seed, double tolerance = 1e-5,
                              bool corrupt = false);

}  // namespace stt

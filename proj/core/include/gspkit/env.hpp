#pragma once

#include <memory>
#include <vector>

namespace gspkit {

// Grid: index is one of the four discrete actions, displacement unused.
// Chain: index is the pick point, (dx, dy) the displacement.
struct EnvAction {
    int index = 0;
    double dx = 0.0;
    double dy = 0.0;
};

struct ActionSpec {
    int num_discrete = 0;        // grid: 4 actions; chain: K pick indices
    bool has_displacement = false;
    int enc_dim() const { return num_discrete + (has_displacement ? 2 : 0); }
};

class Env {
public:
    virtual ~Env() = default;
    virtual int obs_dim() const = 0;
    virtual ActionSpec action_spec() const = 0;
    virtual std::vector<float> observe() const = 0;
    virtual bool step(const EnvAction& a) = 0;  // returns collided (grid only)
    virtual std::unique_ptr<Env> clone() const = 0;
};

}  // namespace gspkit

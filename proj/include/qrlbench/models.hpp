#pragma once

#include "qrlbench/qsim.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

/// Function approximators with hand-written reverse mode. Every model keeps
/// its trainable parameters in one flat vector so that the optimizer, target
/// synchronisation and checkpointing all operate on plain Eigen vectors.
/// Batches are column-major: one sample per column.
namespace qrlbench::models {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { None, ReLU, Tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string &name);

MatrixXd activate(Activation a, const MatrixXd &z);
/// Elementwise derivative of the activation evaluated at pre-activation z.
MatrixXd activate_derivative(Activation a, const MatrixXd &z);

/// Contiguous slice of the flat parameter vector.
struct ParamGroup {
    Index offset = 0;
    Index size = 0;
    bool quantum = false;
};

// ---------------------------------------------------------------------------
// Fully connected network.

class Mlp {
public:
    Mlp() = default;
    /// widths = (input, hidden..., output). Parameters start at zero.
    Mlp(std::vector<Index> widths, Activation activation);

    const std::vector<Index> &widths() const { return widths_; }
    Activation activation() const { return activation_; }
    int n_layers() const { return static_cast<int>(widths_.size()) - 1; }
    Index input_dim() const { return widths_.front(); }
    Index output_dim() const { return widths_.back(); }

    VectorXd &parameters() { return params_; }
    const VectorXd &parameters() const { return params_; }

    Eigen::Map<MatrixXd> weight(int layer);
    Eigen::Map<const MatrixXd> weight(int layer) const;
    Eigen::Map<VectorXd> bias(int layer);
    Eigen::Map<const VectorXd> bias(int layer) const;

    Index weight_offset(int layer) const { return offsets_[layer]; }
    Index bias_offset(int layer) const { return offsets_[layer] + widths_[layer] * widths_[layer + 1]; }

private:
    std::vector<Index> widths_;
    std::vector<Index> offsets_;
    Activation activation_ = Activation::ReLU;
    VectorXd params_;
};

/// He initialisation: weights ~ N(0, 2 / fan_in), biases 0.
Mlp mlp_init(const std::vector<Index> &widths, Activation activation, std::uint64_t seed);

struct MlpCache {
    std::vector<MatrixXd> layer_inputs;   ///< input of every affine layer
    std::vector<MatrixXd> pre_activation; ///< hidden pre-activations
};

struct MlpGradients {
    VectorXd parameters; ///< summed over the batch
    MatrixXd inputs;     ///< gradient with respect to each input column
};

MatrixXd mlp_forward(const Mlp &mlp, const MatrixXd &inputs, MlpCache *cache = nullptr);
MlpGradients mlp_backward(const Mlp &mlp, const MlpCache &cache, const MatrixXd &upstream);

// ---------------------------------------------------------------------------
// Hybrid classical-quantum network:
//   s1 = W_pre s0 + b_pre,  s2 = <Z>(U(act(s1); theta, lambda)),  s3 = W_post act(s2) + b_post.

class Hybrid {
public:
    Hybrid() = default;
    Hybrid(Index input_dim, Index output_dim, qsim::AnsatzSpec spec,
           Activation activation = Activation::None);

    const qsim::AnsatzSpec &spec() const { return spec_; }
    Activation activation() const { return activation_; }
    Index input_dim() const { return input_dim_; }
    Index output_dim() const { return output_dim_; }
    Index n_qubits() const { return spec_.n_qubits; }

    VectorXd &parameters() { return params_; }
    const VectorXd &parameters() const { return params_; }

    Eigen::Map<MatrixXd> w_pre();
    Eigen::Map<const MatrixXd> w_pre() const;
    Eigen::Map<VectorXd> b_pre();
    Eigen::Map<const VectorXd> b_pre() const;
    Eigen::Map<VectorXd> theta();
    Eigen::Map<const VectorXd> theta() const;
    Eigen::Map<VectorXd> lambda();
    Eigen::Map<const VectorXd> lambda() const;
    Eigen::Map<MatrixXd> w_post();
    Eigen::Map<const MatrixXd> w_post() const;
    Eigen::Map<VectorXd> b_post();
    Eigen::Map<const VectorXd> b_post() const;

    qsim::VqcParams<double> vqc() const;

    Index classical_count() const;
    Index quantum_count() const { return 2 * spec_.n_angles(); }
    std::vector<ParamGroup> groups() const;

private:
    Index off_b_pre() const { return spec_.n_qubits * input_dim_; }
    Index off_theta() const { return off_b_pre() + spec_.n_qubits; }
    Index off_lambda() const { return off_theta() + spec_.n_angles(); }
    Index off_w_post() const { return off_lambda() + spec_.n_angles(); }
    Index off_b_post() const { return off_w_post() + output_dim_ * spec_.n_qubits; }

    Index input_dim_ = 0;
    Index output_dim_ = 0;
    qsim::AnsatzSpec spec_;
    Activation activation_ = Activation::None;
    VectorXd params_;
};

/// He-initialised classical maps, theta ~ U[0, 2 pi], lambda = 1.
Hybrid hybrid_init(Index input_dim, Index output_dim, const qsim::AnsatzSpec &spec,
                   Activation activation, std::uint64_t seed);

struct HybridCache {
    MatrixXd s0;
    MatrixXd s1;
    MatrixXd s2;
    std::vector<qsim::Statevector<double>> states;
};

struct HybridGradients {
    VectorXd parameters;
    MatrixXd inputs;
};

MatrixXd hybrid_forward(const Hybrid &net, const MatrixXd &inputs, HybridCache *cache = nullptr);
HybridGradients hybrid_backward(const Hybrid &net, const HybridCache &cache, const MatrixXd &upstream);

// ---------------------------------------------------------------------------
// Parameter counting.

Index param_count_classical(Index width, Index depth, Index dim_in, Index dim_out);
Index param_count_quantum(Index qubits, Index layers, Index dim_in, Index dim_out);

// ---------------------------------------------------------------------------
// Type-erased approximator used by the training loops.

struct ClassicalSpec {
    int width = 64;
    int depth = 2;
    Activation activation = Activation::ReLU;
};

struct HybridSpec {
    int qubits = 10;
    int layers = 4;
    qsim::Structure structure = qsim::Structure::IQP;
    qsim::GateFamily gate_family = qsim::GateFamily::ROT;
    Activation activation = Activation::None;
};

using ModelSpec = std::variant<ClassicalSpec, HybridSpec>;

class Network {
public:
    virtual ~Network() = default;

    virtual Index input_dim() const = 0;
    virtual Index output_dim() const = 0;
    virtual VectorXd &parameters() = 0;
    virtual const VectorXd &parameters() const = 0;
    virtual std::vector<ParamGroup> groups() const = 0;
    virtual std::unique_ptr<Network> clone() const = 0;
    virtual ModelSpec spec() const = 0;

    /// Inference without retaining intermediate values.
    virtual MatrixXd predict(const MatrixXd &inputs) const = 0;
    /// Forward pass that retains what backward() needs.
    virtual MatrixXd forward(const MatrixXd &inputs) = 0;
    /// Parameter gradient of sum(upstream .* output) for the last forward().
    virtual VectorXd backward(const MatrixXd &upstream) const = 0;

    Index n_parameters() const { return parameters().size(); }
};

class MlpNetwork final : public Network {
public:
    explicit MlpNetwork(Mlp mlp) : mlp_(std::move(mlp)) {}

    Index input_dim() const override { return mlp_.input_dim(); }
    Index output_dim() const override { return mlp_.output_dim(); }
    VectorXd &parameters() override { return mlp_.parameters(); }
    const VectorXd &parameters() const override { return mlp_.parameters(); }
    std::vector<ParamGroup> groups() const override;
    std::unique_ptr<Network> clone() const override { return std::make_unique<MlpNetwork>(mlp_); }
    ModelSpec spec() const override;

    MatrixXd predict(const MatrixXd &inputs) const override { return mlp_forward(mlp_, inputs); }
    MatrixXd forward(const MatrixXd &inputs) override { return mlp_forward(mlp_, inputs, &cache_); }
    VectorXd backward(const MatrixXd &upstream) const override
    {
        return mlp_backward(mlp_, cache_, upstream).parameters;
    }

    const Mlp &mlp() const { return mlp_; }

private:
    Mlp mlp_;
    MlpCache cache_;
};

class HybridNetwork final : public Network {
public:
    explicit HybridNetwork(Hybrid net) : net_(std::move(net)) {}

    Index input_dim() const override { return net_.input_dim(); }
    Index output_dim() const override { return net_.output_dim(); }
    VectorXd &parameters() override { return net_.parameters(); }
    const VectorXd &parameters() const override { return net_.parameters(); }
    std::vector<ParamGroup> groups() const override { return net_.groups(); }
    std::unique_ptr<Network> clone() const override { return std::make_unique<HybridNetwork>(net_); }
    ModelSpec spec() const override;

    MatrixXd predict(const MatrixXd &inputs) const override { return hybrid_forward(net_, inputs); }
    MatrixXd forward(const MatrixXd &inputs) override { return hybrid_forward(net_, inputs, &cache_); }
    VectorXd backward(const MatrixXd &upstream) const override
    {
        return hybrid_backward(net_, cache_, upstream).parameters;
    }

    const Hybrid &hybrid() const { return net_; }

private:
    Hybrid net_;
    HybridCache cache_;
};

std::unique_ptr<Network> make_network(const ModelSpec &spec, Index input_dim, Index output_dim,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------

/// Bias-corrected Adam with separate step sizes for classical and quantum
/// parameter groups.
class Adam {
public:
    Adam() = default;
    Adam(Index n_parameters, std::vector<ParamGroup> groups, double beta1 = 0.9,
         double beta2 = 0.999, double epsilon = 1e-8);

    void step(VectorXd &params, const VectorXd &grads, double lr_classical, double lr_quantum);

    long steps() const { return t_; }
    const VectorXd &first_moment() const { return m_; }
    const VectorXd &second_moment() const { return v_; }

private:
    std::vector<ParamGroup> groups_;
    VectorXd m_;
    VectorXd v_;
    long t_ = 0;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double epsilon_ = 1e-8;
};

} // namespace qrlbench::models

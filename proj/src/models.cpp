#include "qrlbench/models.hpp"
#include "qrlbench/rng.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace qrlbench::models {

std::string to_string(Activation a)
{
    switch (a) {
    case Activation::None: return "none";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    }
    return "?";
}

Activation parse_activation(const std::string &name)
{
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "none") return Activation::None;
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

MatrixXd activate(Activation a, const MatrixXd &z)
{
    switch (a) {
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::None: break;
    }
    return z;
}

MatrixXd activate_derivative(Activation a, const MatrixXd &z)
{
    switch (a) {
    case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::None: break;
    }
    return MatrixXd::Ones(z.rows(), z.cols());
}

// ---------------------------------------------------------------------------

Mlp::Mlp(std::vector<Index> widths, Activation activation)
    : widths_(std::move(widths)), activation_(activation)
{
    if (widths_.size() < 2) {
        throw std::invalid_argument("MLP needs at least input and output widths");
    }
    if (std::any_of(widths_.begin(), widths_.end(), [](Index w) { return w < 1; })) {
        throw std::invalid_argument("MLP widths must be positive");
    }
    Index total = 0;
    for (int l = 0; l < n_layers(); ++l) {
        offsets_.push_back(total);
        total += widths_[l] * widths_[l + 1] + widths_[l + 1];
    }
    params_ = VectorXd::Zero(total);
}

Eigen::Map<MatrixXd> Mlp::weight(int layer)
{
    return {params_.data() + weight_offset(layer), widths_[layer + 1], widths_[layer]};
}

Eigen::Map<const MatrixXd> Mlp::weight(int layer) const
{
    return {params_.data() + weight_offset(layer), widths_[layer + 1], widths_[layer]};
}

Eigen::Map<VectorXd> Mlp::bias(int layer)
{
    return {params_.data() + bias_offset(layer), widths_[layer + 1]};
}

Eigen::Map<const VectorXd> Mlp::bias(int layer) const
{
    return {params_.data() + bias_offset(layer), widths_[layer + 1]};
}

Mlp mlp_init(const std::vector<Index> &widths, Activation activation, std::uint64_t seed)
{
    if (widths.size() < 3) {
        throw std::invalid_argument("mlp_init needs at least one hidden layer");
    }
    Mlp mlp(widths, activation);
    Rng rng = make_rng(seed);
    for (int l = 0; l < mlp.n_layers(); ++l) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(widths[l]));
        auto w = mlp.weight(l);
        for (Index j = 0; j < w.cols(); ++j) {
            for (Index i = 0; i < w.rows(); ++i) {
                w(i, j) = stddev * standard_normal(rng);
            }
        }
    }
    return mlp;
}

MatrixXd mlp_forward(const Mlp &mlp, const MatrixXd &inputs, MlpCache *cache)
{
    if (inputs.rows() != mlp.input_dim()) {
        throw std::invalid_argument("MLP input has " + std::to_string(inputs.rows()) +
                                    " rows, expected " + std::to_string(mlp.input_dim()));
    }
    if (cache) {
        cache->layer_inputs.clear();
        cache->pre_activation.clear();
    }
    MatrixXd a = inputs;
    const int last = mlp.n_layers() - 1;
    for (int l = 0; l <= last; ++l) {
        MatrixXd z = mlp.weight(l) * a;
        z.colwise() += mlp.bias(l);
        if (cache) {
            cache->layer_inputs.push_back(std::move(a));
        }
        if (l == last) {
            return z;
        }
        a = activate(mlp.activation(), z);
        if (cache) {
            cache->pre_activation.push_back(std::move(z));
        }
    }
    return a;
}

MlpGradients mlp_backward(const Mlp &mlp, const MlpCache &cache, const MatrixXd &upstream)
{
    const int n = mlp.n_layers();
    if (static_cast<int>(cache.layer_inputs.size()) != n) {
        throw std::invalid_argument("MLP cache does not come from a matching forward pass");
    }
    if (upstream.rows() != mlp.output_dim() || upstream.cols() != cache.layer_inputs[0].cols()) {
        throw std::invalid_argument("MLP upstream gradient has the wrong shape");
    }
    MlpGradients grads;
    grads.parameters = VectorXd::Zero(mlp.parameters().size());
    MatrixXd delta = upstream;
    for (int l = n - 1; l >= 0; --l) {
        const Index rows = mlp.widths()[l + 1];
        const Index cols = mlp.widths()[l];
        Eigen::Map<MatrixXd>(grads.parameters.data() + mlp.weight_offset(l), rows, cols) =
            delta * cache.layer_inputs[l].transpose();
        grads.parameters.segment(mlp.bias_offset(l), rows) = delta.rowwise().sum();
        delta = mlp.weight(l).transpose() * delta;
        if (l > 0) {
            delta.array() *=
                activate_derivative(mlp.activation(), cache.pre_activation[l - 1]).array();
        }
    }
    grads.inputs = std::move(delta);
    return grads;
}

// ---------------------------------------------------------------------------

Hybrid::Hybrid(Index input_dim, Index output_dim, qsim::AnsatzSpec spec, Activation activation)
    : input_dim_(input_dim), output_dim_(output_dim), spec_(spec), activation_(activation)
{
    spec_.validate();
    if (input_dim < 1 || output_dim < 1) {
        throw std::invalid_argument("hybrid model dimensions must be positive");
    }
    params_ = VectorXd::Zero(classical_count() + quantum_count());
}

Index Hybrid::classical_count() const
{
    return (input_dim_ + 1) * spec_.n_qubits + (spec_.n_qubits + 1) * output_dim_;
}

// clang-format off
Eigen::Map<MatrixXd> Hybrid::w_pre() { return {params_.data(), spec_.n_qubits, input_dim_}; }
Eigen::Map<const MatrixXd> Hybrid::w_pre() const { return {params_.data(), spec_.n_qubits, input_dim_}; }
Eigen::Map<VectorXd> Hybrid::b_pre() { return {params_.data() + off_b_pre(), spec_.n_qubits}; }
Eigen::Map<const VectorXd> Hybrid::b_pre() const { return {params_.data() + off_b_pre(), spec_.n_qubits}; }
Eigen::Map<VectorXd> Hybrid::theta() { return {params_.data() + off_theta(), spec_.n_angles()}; }
Eigen::Map<const VectorXd> Hybrid::theta() const { return {params_.data() + off_theta(), spec_.n_angles()}; }
Eigen::Map<VectorXd> Hybrid::lambda() { return {params_.data() + off_lambda(), spec_.n_angles()}; }
Eigen::Map<const VectorXd> Hybrid::lambda() const { return {params_.data() + off_lambda(), spec_.n_angles()}; }
Eigen::Map<MatrixXd> Hybrid::w_post() { return {params_.data() + off_w_post(), output_dim_, spec_.n_qubits}; }
Eigen::Map<const MatrixXd> Hybrid::w_post() const { return {params_.data() + off_w_post(), output_dim_, spec_.n_qubits}; }
Eigen::Map<VectorXd> Hybrid::b_post() { return {params_.data() + off_b_post(), output_dim_}; }
Eigen::Map<const VectorXd> Hybrid::b_post() const { return {params_.data() + off_b_post(), output_dim_}; }
// clang-format on

qsim::VqcParams<double> Hybrid::vqc() const { return {theta(), lambda()}; }

std::vector<ParamGroup> Hybrid::groups() const
{
    return {{0, off_theta(), false},
            {off_theta(), quantum_count(), true},
            {off_w_post(), params_.size() - off_w_post(), false}};
}

Hybrid hybrid_init(Index input_dim, Index output_dim, const qsim::AnsatzSpec &spec,
                   Activation activation, std::uint64_t seed)
{
    Hybrid net(input_dim, output_dim, spec, activation);
    Rng rng = make_rng(seed);
    const double pre_std = std::sqrt(2.0 / static_cast<double>(input_dim));
    const double post_std = std::sqrt(2.0 / static_cast<double>(spec.n_qubits));
    auto w_pre = net.w_pre();
    for (Index i = 0; i < w_pre.size(); ++i) {
        w_pre.data()[i] = pre_std * standard_normal(rng);
    }
    auto theta = net.theta();
    for (Index i = 0; i < theta.size(); ++i) {
        theta(i) = uniform(rng, 0.0, 2.0 * M_PI);
    }
    net.lambda().setOnes();
    auto w_post = net.w_post();
    for (Index i = 0; i < w_post.size(); ++i) {
        w_post.data()[i] = post_std * standard_normal(rng);
    }
    return net;
}

MatrixXd hybrid_forward(const Hybrid &net, const MatrixXd &inputs, HybridCache *cache)
{
    if (inputs.rows() != net.input_dim()) {
        throw std::invalid_argument("hybrid input has " + std::to_string(inputs.rows()) +
                                    " rows, expected " + std::to_string(net.input_dim()));
    }
    MatrixXd s1 = net.w_pre() * inputs;
    s1.colwise() += net.b_pre();
    const MatrixXd encoded = activate(net.activation(), s1);

    const qsim::VqcParams<double> vqc = net.vqc();
    MatrixXd s2(net.n_qubits(), inputs.cols());
    if (cache) {
        cache->states.clear();
        cache->states.reserve(inputs.cols());
    }
    for (Index b = 0; b < inputs.cols(); ++b) {
        const VectorXd angles_in = encoded.col(b);
        qsim::Statevector<double> state = qsim::run_ansatz(net.spec(), angles_in, vqc);
        s2.col(b) = qsim::z_expectations(state);
        if (cache) {
            cache->states.push_back(std::move(state));
        }
    }

    MatrixXd s3 = net.w_post() * activate(net.activation(), s2);
    s3.colwise() += net.b_post();
    if (cache) {
        cache->s0 = inputs;
        cache->s1 = std::move(s1);
        cache->s2 = std::move(s2);
    }
    return s3;
}

HybridGradients hybrid_backward(const Hybrid &net, const HybridCache &cache, const MatrixXd &upstream)
{
    const Index batch = cache.s0.cols();
    if (static_cast<Index>(cache.states.size()) != batch || upstream.cols() != batch ||
        upstream.rows() != net.output_dim()) {
        throw std::invalid_argument("hybrid backward: cache or upstream shape mismatch");
    }
    const Index q = net.n_qubits();
    VectorXd grads = VectorXd::Zero(net.parameters().size());
    Hybrid view(net.input_dim(), net.output_dim(), net.spec(), net.activation());
    view.parameters().swap(grads);

    const MatrixXd post_in = activate(net.activation(), cache.s2);
    view.w_post() = upstream * post_in.transpose();
    view.b_post() = upstream.rowwise().sum();
    MatrixXd d_s2 = net.w_post().transpose() * upstream;
    d_s2.array() *= activate_derivative(net.activation(), cache.s2).array();

    const MatrixXd encoded = activate(net.activation(), cache.s1);
    const qsim::VqcParams<double> vqc = net.vqc();
    MatrixXd d_encoded(q, batch);
    for (Index b = 0; b < batch; ++b) {
        const VectorXd angles_in = encoded.col(b);
        const VectorXd cotangent = d_s2.col(b);
        const auto g = qsim::ansatz_gradients(net.spec(), angles_in, vqc, cotangent, cache.states[b]);
        view.theta() += g.theta;
        view.lambda() += g.lambda;
        d_encoded.col(b) = g.inputs;
    }

    const MatrixXd d_s1 =
        (d_encoded.array() * activate_derivative(net.activation(), cache.s1).array()).matrix();
    view.w_pre() = d_s1 * cache.s0.transpose();
    view.b_pre() = d_s1.rowwise().sum();

    HybridGradients out;
    out.inputs = net.w_pre().transpose() * d_s1;
    out.parameters = std::move(view.parameters());
    return out;
}

// ---------------------------------------------------------------------------

Index param_count_classical(Index width, Index depth, Index dim_in, Index dim_out)
{
    if (width < 1 || depth < 1 || dim_in < 1 || dim_out < 1) {
        throw std::invalid_argument("parameter-count arguments must be positive");
    }
    const Index weights = dim_in * width + (depth - 1) * width * width + width * dim_out;
    const Index biases = width + (depth - 1) * width + dim_out;
    return weights + biases;
}

Index param_count_quantum(Index qubits, Index layers, Index dim_in, Index dim_out)
{
    if (qubits < 1 || layers < 1 || dim_in < 1 || dim_out < 1) {
        throw std::invalid_argument("parameter-count arguments must be positive");
    }
    return 6 * layers * qubits + (dim_in + 1) * qubits + (qubits + 1) * dim_out;
}

// ---------------------------------------------------------------------------

std::vector<ParamGroup> MlpNetwork::groups() const
{
    return {{0, mlp_.parameters().size(), false}};
}

ModelSpec MlpNetwork::spec() const
{
    return ClassicalSpec{static_cast<int>(mlp_.widths()[1]), mlp_.n_layers() - 1, mlp_.activation()};
}

ModelSpec HybridNetwork::spec() const
{
    const auto &s = net_.spec();
    return HybridSpec{s.n_qubits, s.n_layers, s.structure, s.gate_family, net_.activation()};
}

std::unique_ptr<Network> make_network(const ModelSpec &spec, Index input_dim, Index output_dim,
                                      std::uint64_t seed)
{
    if (const auto *c = std::get_if<ClassicalSpec>(&spec)) {
        if (c->width < 1 || c->depth < 1) {
            throw std::invalid_argument("classical model needs positive width and depth");
        }
        std::vector<Index> widths{input_dim};
        widths.insert(widths.end(), c->depth, c->width);
        widths.push_back(output_dim);
        return std::make_unique<MlpNetwork>(mlp_init(widths, c->activation, seed));
    }
    const auto &h = std::get<HybridSpec>(spec);
    const qsim::AnsatzSpec ansatz{h.structure, h.gate_family, h.qubits, h.layers};
    return std::make_unique<HybridNetwork>(
        hybrid_init(input_dim, output_dim, ansatz, h.activation, seed));
}

// ---------------------------------------------------------------------------

Adam::Adam(Index n_parameters, std::vector<ParamGroup> groups, double beta1, double beta2,
           double epsilon)
    : groups_(std::move(groups)), m_(VectorXd::Zero(n_parameters)),
      v_(VectorXd::Zero(n_parameters)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon)
{
    for (const ParamGroup &g : groups_) {
        if (g.offset < 0 || g.size < 0 || g.offset + g.size > n_parameters) {
            throw std::invalid_argument("Adam parameter group outside the parameter vector");
        }
    }
}

void Adam::step(VectorXd &params, const VectorXd &grads, double lr_classical, double lr_quantum)
{
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw std::invalid_argument("Adam state, parameters and gradients must share one shape");
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grads.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const ParamGroup &g : groups_) {
        const double lr = g.quantum ? lr_quantum : lr_classical;
        auto m_hat = m_.segment(g.offset, g.size).array() / c1;
        auto v_hat = v_.segment(g.offset, g.size).array() / c2;
        params.segment(g.offset, g.size).array() -= lr * m_hat / (v_hat.sqrt() + epsilon_);
    }
}

} // namespace qrlbench::models

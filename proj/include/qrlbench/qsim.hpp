#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

/// Dense statevector simulation of the hardware-efficient variational
/// circuits used as hidden layers in the hybrid models. Amplitudes are stored
/// little-endian: qubit q is bit q of the basis-state index.
namespace qrlbench::qsim {

inline constexpr int kMaxQubits = 20;

enum class Structure { IQP, EntCX, EntCZ };
enum class GateFamily { ROT, XYZ, U3 };

std::string to_string(Structure s);
std::string to_string(GateFamily g);
Structure parse_structure(const std::string &name);
GateFamily parse_gate_family(const std::string &name);

struct AnsatzSpec {
    Structure structure = Structure::IQP;
    GateFamily gate_family = GateFamily::ROT;
    int n_qubits = 4;
    int n_layers = 1;

    /// Angles per parameter set (theta or lambda): layers x qubits x 3.
    Eigen::Index n_angles() const { return Eigen::Index{3} * n_layers * n_qubits; }

    void validate() const
    {
        if (n_qubits < 1 || n_qubits > kMaxQubits) {
            throw std::invalid_argument("n_qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
        }
        if (n_layers < 1) {
            throw std::invalid_argument("n_layers must be positive");
        }
        if (structure == Structure::IQP && n_qubits < 2) {
            throw std::invalid_argument("IQP ring needs at least two qubits");
        }
    }
};

template <typename Scalar>
using Complex = std::complex<Scalar>;
template <typename Scalar>
using Matrix2c = Eigen::Matrix<Complex<Scalar>, 2, 2>;
template <typename Scalar>
using VectorXs = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using VectorXc = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, 1>;

/// Trainable circuit parameters; entry (l, q, k) lives at (l * n_qubits + q) * 3 + k.
template <typename Scalar>
struct VqcParams {
    VectorXs<Scalar> theta;
    VectorXs<Scalar> lambda;

    static VqcParams zeros(const AnsatzSpec &spec)
    {
        return {VectorXs<Scalar>::Zero(spec.n_angles()), VectorXs<Scalar>::Zero(spec.n_angles())};
    }
};

inline Eigen::Index angle_index(const AnsatzSpec &spec, int layer, int qubit, int k)
{
    return (static_cast<Eigen::Index>(layer) * spec.n_qubits + qubit) * 3 + k;
}

// ---------------------------------------------------------------------------
// Single-qubit matrices. R_a(x) = exp(-i x sigma_a / 2).

template <typename Scalar>
Matrix2c<Scalar> rx(Scalar a)
{
    const Scalar c = std::cos(a / 2), s = std::sin(a / 2);
    Matrix2c<Scalar> m;
    m << Complex<Scalar>(c, 0), Complex<Scalar>(0, -s), Complex<Scalar>(0, -s), Complex<Scalar>(c, 0);
    return m;
}

template <typename Scalar>
Matrix2c<Scalar> ry(Scalar a)
{
    const Scalar c = std::cos(a / 2), s = std::sin(a / 2);
    Matrix2c<Scalar> m;
    m << c, -s, s, c;
    return m;
}

template <typename Scalar>
Matrix2c<Scalar> rz(Scalar a)
{
    Matrix2c<Scalar> m = Matrix2c<Scalar>::Zero();
    m(0, 0) = std::polar(Scalar(1), -a / 2);
    m(1, 1) = std::polar(Scalar(1), a / 2);
    return m;
}

template <typename Scalar>
Matrix2c<Scalar> pauli(char axis)
{
    Matrix2c<Scalar> m = Matrix2c<Scalar>::Zero();
    const Complex<Scalar> i(0, 1);
    switch (axis) {
    case 'x': m(0, 1) = m(1, 0) = 1; break;
    case 'y': m(0, 1) = -i; m(1, 0) = i; break;
    default: m(0, 0) = 1; m(1, 1) = -1; break;
    }
    return m;
}

template <typename Scalar>
Matrix2c<Scalar> hadamard()
{
    const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
    Matrix2c<Scalar> m;
    m << r, r, r, -r;
    return m;
}

/// Gate matrix and its partial derivatives with respect to each of the three angles.
template <typename Scalar>
struct GateJet {
    Matrix2c<Scalar> value;
    std::array<Matrix2c<Scalar>, 3> partial;
};

/// Angles are passed in storage order (a0, a1, a2); the gate families read
///   ROT = Rz(a2) Ry(a1) Rz(a0),  XYZ = Rz(a2) Ry(a1) Rx(a0),  U3 = U3(a2, a1, a0).
template <typename Scalar>
GateJet<Scalar> gate_jet(GateFamily family, const std::array<Scalar, 3> &a)
{
    GateJet<Scalar> jet;
    const Complex<Scalar> minus_half_i(0, Scalar(-0.5));
    if (family == GateFamily::U3) {
        const Scalar theta = a[2], phi = a[1], delta = a[0];
        const Scalar c = std::cos(theta / 2), s = std::sin(theta / 2);
        const Complex<Scalar> ep = std::polar(Scalar(1), phi);
        const Complex<Scalar> ed = std::polar(Scalar(1), delta);
        const Complex<Scalar> epd = std::polar(Scalar(1), phi + delta);
        const Complex<Scalar> i(0, 1);
        jet.value << c, -ed * s, ep * s, epd * c;
        jet.partial[2] << -s / 2, -ed * c / Scalar(2), ep * c / Scalar(2), -epd * s / Scalar(2);
        jet.partial[1] << Scalar(0), Scalar(0), i * ep * s, i * epd * c;
        jet.partial[0] << Scalar(0), -i * ed * s, Scalar(0), i * epd * c;
        return jet;
    }
    const char first_axis = family == GateFamily::ROT ? 'z' : 'x';
    const Matrix2c<Scalar> g0 = family == GateFamily::ROT ? rz(a[0]) : rx(a[0]);
    const Matrix2c<Scalar> g1 = ry(a[1]);
    const Matrix2c<Scalar> g2 = rz(a[2]);
    jet.value = g2 * g1 * g0;
    jet.partial[0] = g2 * g1 * (minus_half_i * pauli<Scalar>(first_axis) * g0);
    jet.partial[1] = g2 * (minus_half_i * pauli<Scalar>('y') * g1) * g0;
    jet.partial[2] = (minus_half_i * pauli<Scalar>('z') * g2) * g1 * g0;
    return jet;
}

template <typename Scalar>
Matrix2c<Scalar> rotation_matrix(GateFamily family, const std::array<Scalar, 3> &angles)
{
    return gate_jet(family, angles).value;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
class Statevector {
public:
    explicit Statevector(int n_qubits) : n_qubits_(n_qubits)
    {
        if (n_qubits < 1 || n_qubits > kMaxQubits) {
            throw std::invalid_argument("statevector supports 1.." + std::to_string(kMaxQubits) +
                                        " qubits");
        }
        amplitudes_ = VectorXc<Scalar>::Zero(Eigen::Index{1} << n_qubits);
        amplitudes_(0) = 1;
    }

    int n_qubits() const { return n_qubits_; }
    Eigen::Index size() const { return amplitudes_.size(); }
    const VectorXc<Scalar> &amplitudes() const { return amplitudes_; }
    VectorXc<Scalar> &amplitudes() { return amplitudes_; }
    Scalar norm() const { return amplitudes_.norm(); }

    void apply(const Matrix2c<Scalar> &m, int wire) { apply_impl(m, wire, -1); }

    /// Applies `m` to `target` on the subspace where `control` is |1>.
    void apply_controlled(const Matrix2c<Scalar> &m, int control, int target)
    {
        check_pair(control, target);
        apply_impl(m, target, control);
    }

    void h(int wire) { apply(hadamard<Scalar>(), wire); }

    void cx(int control, int target)
    {
        check_pair(control, target);
        const Eigen::Index cmask = Eigen::Index{1} << control;
        const Eigen::Index tmask = Eigen::Index{1} << target;
        for (Eigen::Index i = 0; i < size(); ++i) {
            if ((i & cmask) && !(i & tmask)) {
                std::swap(amplitudes_(i), amplitudes_(i | tmask));
            }
        }
    }

    void cz(int a, int b)
    {
        check_pair(a, b);
        const Eigen::Index mask = (Eigen::Index{1} << a) | (Eigen::Index{1} << b);
        for (Eigen::Index i = 0; i < size(); ++i) {
            if ((i & mask) == mask) {
                amplitudes_(i) = -amplitudes_(i);
            }
        }
    }

private:
    void check_wire(int wire) const
    {
        if (wire < 0 || wire >= n_qubits_) {
            throw std::out_of_range("wire " + std::to_string(wire) + " outside register of " +
                                    std::to_string(n_qubits_) + " qubits");
        }
    }

    void check_pair(int a, int b) const
    {
        check_wire(a);
        check_wire(b);
        if (a == b) {
            throw std::invalid_argument("two-qubit gate needs distinct wires");
        }
    }

    void apply_impl(const Matrix2c<Scalar> &m, int target, int control)
    {
        check_wire(target);
        const Eigen::Index tmask = Eigen::Index{1} << target;
        const Eigen::Index cmask = control >= 0 ? (Eigen::Index{1} << control) : 0;
        for (Eigen::Index i = 0; i < size(); ++i) {
            if ((i & tmask) || (i & cmask) != cmask) {
                continue;
            }
            const Complex<Scalar> a0 = amplitudes_(i);
            const Complex<Scalar> a1 = amplitudes_(i | tmask);
            amplitudes_(i) = m(0, 0) * a0 + m(0, 1) * a1;
            amplitudes_(i | tmask) = m(1, 0) * a0 + m(1, 1) * a1;
        }
    }

    int n_qubits_;
    VectorXc<Scalar> amplitudes_;
};

/// <lhs| (m acting on target, restricted to control = |1> if control >= 0) |rhs>.
template <typename Scalar>
Complex<Scalar> braket(const VectorXc<Scalar> &lhs, const Matrix2c<Scalar> &m,
                       const VectorXc<Scalar> &rhs, int target, int control = -1)
{
    const Eigen::Index tmask = Eigen::Index{1} << target;
    const Eigen::Index cmask = control >= 0 ? (Eigen::Index{1} << control) : 0;
    Complex<Scalar> acc = 0;
    for (Eigen::Index i = 0; i < rhs.size(); ++i) {
        if ((i & tmask) || (i & cmask) != cmask) {
            continue;
        }
        const Eigen::Index j = i | tmask;
        acc += std::conj(lhs(i)) * (m(0, 0) * rhs(i) + m(0, 1) * rhs(j));
        acc += std::conj(lhs(j)) * (m(1, 0) * rhs(i) + m(1, 1) * rhs(j));
    }
    return acc;
}

/// <Z_q> for every qubit.
template <typename Scalar>
VectorXs<Scalar> z_expectations(const Statevector<Scalar> &state)
{
    const int n = state.n_qubits();
    VectorXs<Scalar> z = VectorXs<Scalar>::Zero(n);
    const auto &amps = state.amplitudes();
    for (Eigen::Index i = 0; i < amps.size(); ++i) {
        const Scalar p = std::norm(amps(i));
        for (int q = 0; q < n; ++q) {
            z(q) += (i >> q) & 1 ? -p : p;
        }
    }
    return z;
}

// ---------------------------------------------------------------------------
// Ansatz construction.

/// One instruction of a compiled ansatz. Variational gates carry the
/// (layer, qubit) index of their angle triple.
struct Instruction {
    enum class Kind { H, CX, CZ, Variational, ControlledVariational };
    Kind kind;
    int target;
    int control = -1;
    int layer = -1;
    int qubit = -1;
};

/// Flattened gate sequence: H on every qubit, then per layer either
///   Ent-CX / Ent-CZ: U_{l,q} on every qubit followed by a nearest-neighbour
///                    entangler chain (q, q+1), q = 0..n-2;
///   IQP:             controlled U_{l,q} with control q and target (q+1) mod n,
///                    followed by H on every qubit.
inline std::vector<Instruction> compile_ansatz(const AnsatzSpec &spec)
{
    spec.validate();
    using K = Instruction::Kind;
    const int n = spec.n_qubits;
    std::vector<Instruction> program;
    for (int q = 0; q < n; ++q) {
        program.push_back({K::H, q});
    }
    for (int l = 0; l < spec.n_layers; ++l) {
        if (spec.structure == Structure::IQP) {
            for (int q = 0; q < n; ++q) {
                program.push_back({K::ControlledVariational, (q + 1) % n, q, l, q});
            }
            for (int q = 0; q < n; ++q) {
                program.push_back({K::H, q});
            }
            continue;
        }
        for (int q = 0; q < n; ++q) {
            program.push_back({K::Variational, q, -1, l, q});
        }
        const K entangler = spec.structure == Structure::EntCX ? K::CX : K::CZ;
        for (int q = 0; q + 1 < n; ++q) {
            program.push_back({entangler, q + 1, q});
        }
    }
    return program;
}

template <typename Scalar>
std::array<Scalar, 3> gate_angles(const AnsatzSpec &spec, const VqcParams<Scalar> &params,
                                  const VectorXs<Scalar> &inputs, int layer, int qubit)
{
    std::array<Scalar, 3> a{};
    for (int k = 0; k < 3; ++k) {
        const Eigen::Index idx = angle_index(spec, layer, qubit, k);
        a[k] = params.lambda(idx) * inputs(qubit) + params.theta(idx);
    }
    return a;
}

template <typename Scalar>
void check_shapes(const AnsatzSpec &spec, const VectorXs<Scalar> &inputs,
                  const VqcParams<Scalar> &params)
{
    if (inputs.size() != spec.n_qubits) {
        throw std::invalid_argument("ansatz expects " + std::to_string(spec.n_qubits) +
                                    " inputs, got " + std::to_string(inputs.size()));
    }
    if (params.theta.size() != spec.n_angles() || params.lambda.size() != spec.n_angles()) {
        throw std::invalid_argument("VQC parameter shape does not match the ansatz");
    }
}

/// Prepares |0...0>, then runs the compiled ansatz with gate angles
/// lambda_{l,q,k} * s_q + theta_{l,q,k}.
template <typename Scalar>
Statevector<Scalar> run_ansatz(const AnsatzSpec &spec, const VectorXs<Scalar> &inputs,
                               const VqcParams<Scalar> &params)
{
    check_shapes(spec, inputs, params);
    using K = Instruction::Kind;
    Statevector<Scalar> state(spec.n_qubits);
    for (const Instruction &op : compile_ansatz(spec)) {
        switch (op.kind) {
        case K::H: state.h(op.target); break;
        case K::CX: state.cx(op.control, op.target); break;
        case K::CZ: state.cz(op.control, op.target); break;
        case K::Variational:
            state.apply(rotation_matrix(spec.gate_family,
                                        gate_angles(spec, params, inputs, op.layer, op.qubit)),
                        op.target);
            break;
        case K::ControlledVariational:
            state.apply_controlled(
                rotation_matrix(spec.gate_family,
                                gate_angles(spec, params, inputs, op.layer, op.qubit)),
                op.control, op.target);
            break;
        }
    }
    return state;
}

template <typename Scalar>
struct AnsatzGradients {
    VectorXs<Scalar> theta;
    VectorXs<Scalar> lambda;
    VectorXs<Scalar> inputs;
};

/// Reverse-mode gradient of upstream . z_expectations(run_ansatz(...)). The
/// sweep starts from `final_state` (the output of run_ansatz for the same
/// arguments) and uncomputes one gate at a time.
template <typename Scalar>
AnsatzGradients<Scalar> ansatz_gradients(const AnsatzSpec &spec, const VectorXs<Scalar> &inputs,
                                         const VqcParams<Scalar> &params,
                                         const VectorXs<Scalar> &upstream,
                                         const Statevector<Scalar> &final_state)
{
    check_shapes(spec, inputs, params);
    if (upstream.size() != spec.n_qubits) {
        throw std::invalid_argument("upstream cotangent must have one entry per qubit");
    }
    using K = Instruction::Kind;
    const int n = spec.n_qubits;

    AnsatzGradients<Scalar> grads{VectorXs<Scalar>::Zero(spec.n_angles()),
                                  VectorXs<Scalar>::Zero(spec.n_angles()),
                                  VectorXs<Scalar>::Zero(n)};

    Statevector<Scalar> psi = final_state;
    Statevector<Scalar> lam = final_state;
    {
        auto &amps = lam.amplitudes();
        for (Eigen::Index i = 0; i < amps.size(); ++i) {
            Scalar weight = 0;
            for (int q = 0; q < n; ++q) {
                weight += (i >> q) & 1 ? -upstream(q) : upstream(q);
            }
            amps(i) *= weight;
        }
    }

    const std::vector<Instruction> program = compile_ansatz(spec);
    for (auto it = program.rbegin(); it != program.rend(); ++it) {
        const Instruction &op = *it;
        switch (op.kind) {
        case K::H:
            psi.h(op.target);
            lam.h(op.target);
            break;
        case K::CX:
            psi.cx(op.control, op.target);
            lam.cx(op.control, op.target);
            break;
        case K::CZ:
            psi.cz(op.control, op.target);
            lam.cz(op.control, op.target);
            break;
        case K::Variational:
        case K::ControlledVariational: {
            const GateJet<Scalar> jet =
                gate_jet(spec.gate_family, gate_angles(spec, params, inputs, op.layer, op.qubit));
            const Matrix2c<Scalar> inverse = jet.value.adjoint();
            const int control = op.kind == K::ControlledVariational ? op.control : -1;
            if (control >= 0) {
                psi.apply_controlled(inverse, control, op.target);
            } else {
                psi.apply(inverse, op.target);
            }
            for (int k = 0; k < 3; ++k) {
                const Scalar g = Scalar(2) * std::real(braket(lam.amplitudes(), jet.partial[k],
                                                              psi.amplitudes(), op.target, control));
                const Eigen::Index idx = angle_index(spec, op.layer, op.qubit, k);
                grads.theta(idx) += g;
                grads.inputs(op.qubit) += params.lambda(idx) * g;
            }
            if (control >= 0) {
                lam.apply_controlled(inverse, control, op.target);
            } else {
                lam.apply(inverse, op.target);
            }
            break;
        }
        }
    }

    // d(angle)/d(lambda) = s_q, so the lambda gradient is the theta gradient
    // rescaled per qubit.
    for (int l = 0; l < spec.n_layers; ++l) {
        for (int q = 0; q < n; ++q) {
            for (int k = 0; k < 3; ++k) {
                const Eigen::Index idx = angle_index(spec, l, q, k);
                grads.lambda(idx) = inputs(q) * grads.theta(idx);
            }
        }
    }
    return grads;
}

template <typename Scalar>
AnsatzGradients<Scalar> ansatz_gradients(const AnsatzSpec &spec, const VectorXs<Scalar> &inputs,
                                         const VqcParams<Scalar> &params,
                                         const VectorXs<Scalar> &upstream)
{
    return ansatz_gradients(spec, inputs, params, upstream, run_ansatz(spec, inputs, params));
}

} // namespace qrlbench::qsim

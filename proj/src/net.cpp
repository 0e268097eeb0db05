#include "lpa/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "lpa/rng.hpp"

namespace lpa {

void MlpNetwork::validate() const {
    if (layers.size() < 1) throw std::invalid_argument("network has no layers");
    std::size_t prev = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& lay = layers[l];
        if (lay.in_dim() != prev)
            throw std::invalid_argument("layer " + std::to_string(l + 1) +
                                        ": input dim " + std::to_string(lay.in_dim()) +
                                        " != previous dim " + std::to_string(prev));
        if (lay.bias.size() != lay.out_dim())
            throw std::invalid_argument("layer " + std::to_string(l + 1) + ": bias size mismatch");
        prev = lay.out_dim();
    }
    if (layers.back().activation != Activation::Identity)
        throw std::invalid_argument("final layer must have Identity activation (logits)");
}

MlpNetwork make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                    std::size_t classes, std::uint64_t seed) {
    MlpNetwork net;
    net.input_dim = input_dim;
    net.init_seed = seed;
    std::vector<std::size_t> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(classes);
    for (std::size_t l = 1; l < dims.size(); ++l) {
        DenseLayer lay;
        lay.weights = Matrix(dims[l], dims[l - 1]);
        lay.bias.assign(dims[l], 0.0);
        lay.activation = (l + 1 == dims.size()) ? Activation::Identity : Activation::ReLU;
        Rng rng = make_stream(seed, "init.weights", l);
        const double sd = std::sqrt(2.0 / static_cast<double>(dims[l - 1]));
        for (double& w : lay.weights.data) w = sd * rng.normal();
        net.layers.push_back(std::move(lay));
    }
    net.validate();
    return net;
}

static void apply_activation(Matrix& m, Activation act) {
    if (act == Activation::ReLU)
        for (double& x : m.data) x = x > 0.0 ? x : 0.0;  // subgradient-at-0 convention: 0
}

static Matrix layer_forward(const DenseLayer& lay, const Matrix& in, std::size_t l) {
    if (in.cols != lay.in_dim())
        throw std::invalid_argument("layer " + std::to_string(l) + ": expected input dim " +
                                    std::to_string(lay.in_dim()) + ", got " +
                                    std::to_string(in.cols));
    Matrix z = matmul_nt(in, lay.weights);
    for (std::size_t i = 0; i < z.rows; ++i)
        for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += lay.bias[j];
    return z;
}

ForwardTrace forward_full(const MlpNetwork& net, const Matrix& batch) {
    ForwardTrace trace;
    trace.input = batch;
    const Matrix* cur = &trace.input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Matrix z = layer_forward(net.layers[l], *cur, l + 1);
        Matrix a = z;
        apply_activation(a, net.layers[l].activation);
        trace.pre.push_back(std::move(z));
        trace.act.push_back(std::move(a));
        cur = &trace.act.back();
    }
    check_finite(trace.logits(), "logits");
    return trace;
}

Matrix forward_from(const MlpNetwork& net, std::size_t l, const Matrix& activations) {
    if (l > net.depth())
        throw std::invalid_argument("forward_from: layer " + std::to_string(l) +
                                    " out of range [0, " + std::to_string(net.depth()) + "]");
    Matrix cur = activations;
    for (std::size_t j = l; j < net.depth(); ++j) {
        cur = layer_forward(net.layers[j], cur, j + 1);
        apply_activation(cur, net.layers[j].activation);
    }
    return cur;
}

CrossEntropy cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    if (labels.size() != logits.rows)
        throw std::invalid_argument("cross_entropy: label count != batch size");
    const std::size_t C = logits.cols;
    CrossEntropy out;
    out.probabilities = Matrix(logits.rows, C);
    out.sample_loss.resize(logits.rows);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                        " out of range for C=" + std::to_string(C));
        auto row = logits.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double denom = 0.0;
        for (std::size_t j = 0; j < C; ++j) denom += std::exp(row[j] - mx);
        const double log_denom = std::log(denom);
        for (std::size_t j = 0; j < C; ++j)
            out.probabilities(i, j) = std::exp(row[j] - mx) / denom;
        out.sample_loss[i] = log_denom - (row[y] - mx);
        total += out.sample_loss[i];
    }
    out.mean_loss = total / static_cast<double>(logits.rows);
    return out;
}

static Matrix relu_mask_backward(const Matrix& upstream, const Matrix& pre) {
    Matrix g = upstream;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (pre.data[i] <= 0.0) g.data[i] = 0.0;
    return g;
}

GradientBundle backward(const MlpNetwork& net, const ForwardTrace& trace,
                        const std::vector<int>& labels, std::size_t grad_layer) {
    const std::size_t L = net.depth();
    if (grad_layer > L)
        throw std::invalid_argument("backward: grad_layer out of range");
    if (trace.depth() != L)
        throw std::invalid_argument("backward: trace depth != network depth");
    const std::size_t N = trace.input.rows;

    CrossEntropy ce = cross_entropy(trace.logits(), labels);
    // dz at the logit layer for the mean loss: (p − onehot)/N
    Matrix dz = ce.probabilities;
    for (std::size_t i = 0; i < N; ++i) dz(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    for (double& x : dz.data) x /= static_cast<double>(N);

    GradientBundle g;
    g.grad_layer = grad_layer;
    g.weight_grads.resize(L);
    g.bias_grads.resize(L);
    if (grad_layer == L) {
        g.activation_grads = dz;
        for (double& x : g.activation_grads.data) x *= static_cast<double>(N);
    }

    for (std::size_t l = L; l-- > 0;) {
        const Matrix& input_act = trace.activation(l);  // a^(l), feeds layer l+1
        g.weight_grads[l] = matmul_tn(dz, input_act);
        auto& bg = g.bias_grads[l];
        bg.assign(net.layers[l].out_dim(), 0.0);
        for (std::size_t i = 0; i < dz.rows; ++i)
            for (std::size_t j = 0; j < dz.cols; ++j) bg[j] += dz(i, j);
        if (l == 0 && grad_layer != 0) break;
        Matrix da = matmul(dz, net.layers[l].weights);  // ∂L/∂a^(l)
        if (grad_layer == l) {
            g.activation_grads = da;
            for (double& x : g.activation_grads.data) x *= static_cast<double>(N);
        }
        if (l == 0) break;
        dz = (net.layers[l - 1].activation == Activation::ReLU)
                 ? relu_mask_backward(da, trace.pre[l - 1])
                 : std::move(da);
    }
    return g;
}

Matrix activation_loss_grads(const MlpNetwork& net, std::size_t l,
                             const Matrix& activations, const std::vector<int>& labels) {
    const std::size_t L = net.depth();
    if (l > L) throw std::invalid_argument("activation_loss_grads: layer out of range");
    // forward through the subnetwork, keeping pre-activations for backprop
    std::vector<Matrix> pre;
    Matrix cur = activations;
    for (std::size_t j = l; j < L; ++j) {
        Matrix z = layer_forward(net.layers[j], cur, j + 1);
        pre.push_back(z);
        apply_activation(z, net.layers[j].activation);
        cur = std::move(z);
    }
    CrossEntropy ce = cross_entropy(cur, labels);
    Matrix dz = ce.probabilities;  // per-sample losses, no 1/N
    for (std::size_t i = 0; i < dz.rows; ++i) dz(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    for (std::size_t j = L; j-- > l;) {
        if (net.layers[j].activation == Activation::ReLU)
            dz = relu_mask_backward(dz, pre[j - l]);
        dz = matmul(dz, net.layers[j].weights);
    }
    return dz;
}

double spectral_norm(const Matrix& m, int iterations, std::uint64_t seed) {
    if (m.empty()) throw std::invalid_argument("spectral_norm: empty matrix");
    if (iterations < 1) throw std::invalid_argument("spectral_norm: iterations must be >= 1");
    Rng rng = make_stream(seed, "spectral_norm");
    std::vector<double> v(m.cols);
    for (double& x : v) x = rng.normal();
    double nv = l2_norm(v);
    if (nv == 0.0) v[0] = 1.0, nv = 1.0;
    scale(v, 1.0 / nv);

    double sigma = 0.0;
    Matrix vm = Matrix::row_vector(v);
    for (int it = 0; it < iterations; ++it) {
        Matrix mv = matmul_nt(vm, m);       // 1 × rows
        sigma = l2_norm({mv.data});
        if (sigma == 0.0) return 0.0;
        Matrix mtmv = matmul(mv, m);        // 1 × cols
        const double n = l2_norm({mtmv.data});
        if (n == 0.0) break;
        for (double& x : mtmv.data) x /= n;
        vm = std::move(mtmv);
    }
    return sigma;
}

double downstream_lipschitz_bound(const MlpNetwork& net, std::size_t l,
                                  int iterations, std::uint64_t seed) {
    double bound = 1.0;
    for (std::size_t j = l; j < net.depth(); ++j)
        bound *= spectral_norm(net.layers[j].weights, iterations, seed + j);
    return bound;
}

void save_checkpoint(const MlpNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out << "LPANET 1\n";
    out << "seed " << net.init_seed << "\n";
    out << "input_dim " << net.input_dim << "\n";
    out << "layers " << net.depth() << "\n";
    out << std::hexfloat;
    for (const auto& lay : net.layers) {
        out << "layer " << lay.out_dim() << " " << lay.in_dim() << " "
            << (lay.activation == Activation::ReLU ? "relu" : "identity") << "\n";
        for (double w : lay.weights.data) out << w << "\n";
        for (double b : lay.bias) out << b << "\n";
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

MlpNetwork load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "LPANET" || version != 1)
        throw std::runtime_error("unrecognized checkpoint format: " + path);
    MlpNetwork net;
    std::string key;
    std::size_t n_layers = 0;
    in >> key >> net.init_seed >> key >> net.input_dim >> key >> n_layers;
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::size_t out_dim = 0, in_dim = 0;
        std::string act;
        in >> key >> out_dim >> in_dim >> act;
        DenseLayer lay;
        lay.weights = Matrix(out_dim, in_dim);
        lay.bias.assign(out_dim, 0.0);
        lay.activation = (act == "relu") ? Activation::ReLU : Activation::Identity;
        std::string tok;
        for (double& w : lay.weights.data) {
            in >> tok;
            w = std::strtod(tok.c_str(), nullptr);  // hexfloat round-trip
        }
        for (double& b : lay.bias) {
            in >> tok;
            b = std::strtod(tok.c_str(), nullptr);
        }
        net.layers.push_back(std::move(lay));
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    net.validate();
    return net;
}

}  // namespace lpa

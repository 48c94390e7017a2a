#include "hyperpredict/predictor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "hyperpredict/errors.hpp"
#include "hyperpredict/rng.hpp"

namespace hyperpredict {

namespace {

constexpr std::array<char, 8> kMagic{'H', 'P', 'R', 'E', 'D', 'M', 'L', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

Eigen::MatrixXd leaky(const Eigen::MatrixXd& z, double slope) {
    return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Eigen::MatrixXd leaky_grad(const Eigen::MatrixXd& z, double slope) {
    return z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("predictor file truncated");
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    const auto n = get<std::uint32_t>(is);
    if (n > 4096) throw DataError("predictor file: implausible string length");
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw DataError("predictor file truncated");
    return s;
}

void put_doubles(std::ostream& os, const double* p, std::size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& is, double* p, std::size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw DataError("predictor file truncated");
}

Eigen::MatrixXd target_matrix(const std::vector<RegistrationRecord>& records, std::uint32_t L) {
    Eigen::MatrixXd t(L + 1, static_cast<Eigen::Index>(records.size()));
    for (std::size_t j = 0; j < records.size(); ++j) {
        const auto& r = records[j];
        if (r.target.dice.size() != L) throw DataError("record label count mismatch for " + r.pair_id);
        for (std::uint32_t l = 0; l < L; ++l) t(l, static_cast<Eigen::Index>(j)) = r.target.dice[l];
        t(L, static_cast<Eigen::Index>(j)) = r.target.nfv_percent;
    }
    return t;
}

struct MomentEstimate {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
};

}  // namespace

void MlpConfig::validate() const {
    for (const int h : hidden) {
        if (h < 1) throw ConfigError("mlp: hidden sizes must be >= 1");
    }
    if (!(negative_slope >= 0.0)) throw ConfigError("mlp: negative slope must be >= 0");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
    if (!(alpha >= 0.0)) throw ConfigError("train: alpha must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (!(log_sigma >= 0.0)) throw ConfigError("train: log-normal sigma must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
        throw ConfigError("train: invalid Adam constants");
    }
}

LossParts multitask_loss(const MetricVector& pred, const MetricVector& target, double alpha) {
    if (pred.dice.size() != target.dice.size()) throw ConfigError("loss: label count mismatch");
    LossParts l;
    for (std::size_t i = 0; i < pred.dice.size(); ++i) {
        const double d = pred.dice[i] - target.dice[i];
        l.overlap += d * d;
    }
    if (!pred.dice.empty()) l.overlap /= static_cast<double>(pred.dice.size());
    const double x = pred.nfv_percent - target.nfv_percent;
    l.nfv = x * x;
    l.total = l.overlap + alpha * l.nfv;
    return l;
}

std::vector<double> Gradients::flatten() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        for (Eigen::Index r = 0; r < weight[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < weight[l].cols(); ++c) out.push_back(weight[l](r, c));
        }
        for (Eigen::Index r = 0; r < bias[l].size(); ++r) out.push_back(bias[l](r));
    }
    return out;
}

Predictor Predictor::create(const EncoderConfig& encoder, std::vector<std::string> hp_names,
                            std::uint32_t label_count, const MlpConfig& mlp) {
    mlp.validate();
    encoder.validate();
    if (label_count < 1) throw ConfigError("predictor: label count must be >= 1");
    if (hp_names.empty()) throw ConfigError("predictor: at least one hyperparameter required");
    Predictor p;
    p.encoder_ = encoder;
    p.hp_names_ = std::move(hp_names);
    p.label_count_ = label_count;
    p.negative_slope_ = mlp.negative_slope;
    const std::size_t enc_dim = encoding_length(encoder);
    p.enc_mean_.assign(enc_dim, 0.0);
    p.enc_sd_.assign(enc_dim, 1.0);
    p.hp_mean_.assign(p.hp_names_.size(), 0.0);
    p.hp_sd_.assign(p.hp_names_.size(), 1.0);

    std::vector<int> dims{static_cast<int>(p.input_dim())};
    dims.insert(dims.end(), mlp.hidden.begin(), mlp.hidden.end());
    dims.push_back(static_cast<int>(p.output_dim()));
    Rng rng(mlp.init_seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l];
        const int out = dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
        for (int r = 0; r < out; ++r) {
            for (int c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
        }
        for (int r = 0; r < out; ++r) layer.bias(r) = rng.uniform(-bound, bound);
        p.layers_.push_back(std::move(layer));
    }
    return p;
}

void Predictor::set_normalization(std::vector<double> enc_mean, std::vector<double> enc_sd,
                                  std::vector<double> hp_mean, std::vector<double> hp_sd) {
    if (enc_mean.size() != encoding_dim() || enc_sd.size() != encoding_dim() ||
        hp_mean.size() != hp_names_.size() || hp_sd.size() != hp_names_.size()) {
        throw ConfigError("predictor: normalization dimension mismatch");
    }
    enc_mean_ = std::move(enc_mean);
    enc_sd_ = std::move(enc_sd);
    hp_mean_ = std::move(hp_mean);
    hp_sd_ = std::move(hp_sd);
}

void Predictor::check_encoding(const Encoding& e) const {
    if (e.values.size() != encoding_dim()) {
        throw ConfigError("predictor: encoding length " + std::to_string(e.values.size()) +
                          " does not match " + std::to_string(encoding_dim()));
    }
}

Eigen::VectorXd Predictor::normalize_encoding(const Encoding& e) const {
    check_encoding(e);
    Eigen::VectorXd v(static_cast<Eigen::Index>(encoding_dim()));
    for (std::size_t i = 0; i < encoding_dim(); ++i) {
        v(static_cast<Eigen::Index>(i)) = (e.values[i] - enc_mean_[i]) / enc_sd_[i];
    }
    return v;
}

Eigen::VectorXd Predictor::normalize_hyperparams(const HyperparamPoint& hp) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(hp_names_.size()));
    for (std::size_t i = 0; i < hp_names_.size(); ++i) {
        const auto value = hp.find(hp_names_[i]);
        if (!value) throw ConfigError("predictor: hyperparameter '" + hp_names_[i] + "' missing");
        if (!(*value > 0.0)) {
            throw ConfigError("predictor: hyperparameter '" + hp_names_[i] + "' must be > 0");
        }
        v(static_cast<Eigen::Index>(i)) = (std::log(*value) - hp_mean_[i]) / hp_sd_[i];
    }
    return v;
}

Eigen::VectorXd Predictor::input_vector(const Encoding& e, const HyperparamPoint& hp) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(input_dim()));
    v << normalize_encoding(e), normalize_hyperparams(hp);
    return v;
}

Eigen::MatrixXd Predictor::forward_batch(const Eigen::MatrixXd& inputs) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
        throw ConfigError("predictor: input dimension mismatch");
    }
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = layers_[l].weight * a;
        z.colwise() += layers_[l].bias;
        a = (l + 1 < layers_.size()) ? leaky(z, negative_slope_) : std::move(z);
    }
    return a;
}

MetricVector Predictor::forward(const Encoding& e, const HyperparamPoint& hp) const {
    const Eigen::MatrixXd out = forward_batch(input_vector(e, hp));
    MetricVector m;
    m.dice.resize(label_count_);
    for (std::uint32_t l = 0; l < label_count_; ++l) m.dice[l] = out(l, 0);
    m.nfv_percent = out(label_count_, 0);
    return m;
}

std::vector<MetricVector> Predictor::forward_many(const Encoding& e,
                                                  const std::vector<HyperparamPoint>& hps) const {
    const auto n = static_cast<Eigen::Index>(hps.size());
    const auto enc_dim = static_cast<Eigen::Index>(encoding_dim());
    const auto hp_dim = static_cast<Eigen::Index>(hp_names_.size());
    const DenseLayer& first = layers_.front();
    const Eigen::VectorXd base = first.weight.leftCols(enc_dim) * normalize_encoding(e) + first.bias;
    Eigen::MatrixXd h(hp_dim, n);
    for (Eigen::Index j = 0; j < n; ++j) h.col(j) = normalize_hyperparams(hps[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd z = first.weight.rightCols(hp_dim) * h;
    z.colwise() += base;
    Eigen::MatrixXd a = layers_.size() > 1 ? leaky(z, negative_slope_) : z;
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        Eigen::MatrixXd zl = layers_[l].weight * a;
        zl.colwise() += layers_[l].bias;
        a = (l + 1 < layers_.size()) ? leaky(zl, negative_slope_) : std::move(zl);
    }
    std::vector<MetricVector> out(hps.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        MetricVector& m = out[static_cast<std::size_t>(j)];
        m.dice.resize(label_count_);
        for (std::uint32_t l = 0; l < label_count_; ++l) m.dice[l] = a(l, j);
        m.nfv_percent = a(label_count_, j);
    }
    return out;
}

std::size_t Predictor::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

std::vector<double> Predictor::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
    }
    return out;
}

void Predictor::set_parameters(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) throw ConfigError("predictor: parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat[k++];
    }
}

void Predictor::save(std::ostream& os) const {
    static_assert(std::endian::native == std::endian::little);
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, kFormatVersion);
    put<std::uint32_t>(os, label_count_);
    put<std::int32_t>(os, encoder_.channels);
    put<std::int32_t>(os, encoder_.pool_nx);
    put<std::int32_t>(os, encoder_.pool_ny);
    put<std::uint32_t>(os, encoder_.summary == SummaryMode::mean ? 0 : 1);
    put<std::uint32_t>(os, encoder_.bank == FeatureBank::differential ? 0 : 1);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(hp_names_.size()));
    for (std::size_t i = 0; i < hp_names_.size(); ++i) {
        put_string(os, hp_names_[i]);
        put<double>(os, hp_mean_[i]);
        put<double>(os, hp_sd_[i]);
    }
    put<std::uint32_t>(os, static_cast<std::uint32_t>(enc_mean_.size()));
    put_doubles(os, enc_mean_.data(), enc_mean_.size());
    put_doubles(os, enc_sd_.data(), enc_sd_.size());
    put<double>(os, negative_slope_);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(layers_.size()));
    for (const auto& l : layers_) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.weight.rows()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.weight.cols()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put<double>(os, l.weight(r, c));
        }
        put_doubles(os, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    if (!os) throw DataError("failed writing predictor");
}

void Predictor::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    save(os);
}

Predictor Predictor::load(std::istream& is) {
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw DataError("not a predictor file (bad magic)");
    const auto version = get<std::uint32_t>(is);
    if (version != kFormatVersion) {
        throw DataError("unsupported predictor file version " + std::to_string(version));
    }
    Predictor p;
    p.label_count_ = get<std::uint32_t>(is);
    p.encoder_.channels = get<std::int32_t>(is);
    p.encoder_.pool_nx = get<std::int32_t>(is);
    p.encoder_.pool_ny = get<std::int32_t>(is);
    p.encoder_.summary = get<std::uint32_t>(is) == 0 ? SummaryMode::mean : SummaryMode::min_max_mean;
    p.encoder_.bank = get<std::uint32_t>(is) == 0 ? FeatureBank::differential : FeatureBank::smoothing;
    p.encoder_.validate();
    const auto n_hp = get<std::uint32_t>(is);
    if (n_hp == 0 || n_hp > 64) throw DataError("predictor file: implausible hyperparameter count");
    for (std::uint32_t i = 0; i < n_hp; ++i) {
        p.hp_names_.push_back(get_string(is));
        p.hp_mean_.push_back(get<double>(is));
        p.hp_sd_.push_back(get<double>(is));
    }
    const auto enc_dim = get<std::uint32_t>(is);
    if (enc_dim != encoding_length(p.encoder_)) {
        throw DataError("predictor file: encoding dimension disagrees with encoder config");
    }
    p.enc_mean_.resize(enc_dim);
    p.enc_sd_.resize(enc_dim);
    get_doubles(is, p.enc_mean_.data(), enc_dim);
    get_doubles(is, p.enc_sd_.data(), enc_dim);
    p.negative_slope_ = get<double>(is);
    const auto n_layers = get<std::uint32_t>(is);
    if (n_layers == 0 || n_layers > 64) throw DataError("predictor file: implausible layer count");
    std::size_t expected_in = p.input_dim();
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const auto out = get<std::uint32_t>(is);
        const auto in = get<std::uint32_t>(is);
        if (in != expected_in || out == 0 || out > (1u << 16)) {
            throw DataError("predictor file: layer dimensions do not chain");
        }
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = get<double>(is);
        }
        get_doubles(is, layer.bias.data(), out);
        expected_in = out;
        p.layers_.push_back(std::move(layer));
    }
    if (expected_in != p.output_dim()) throw DataError("predictor file: output dimension mismatch");
    return p;
}

Predictor Predictor::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read " + path.string());
    return load(is);
}

bool operator==(const Predictor& a, const Predictor& b) {
    if (a.label_count_ != b.label_count_ || a.hp_names_ != b.hp_names_ ||
        a.negative_slope_ != b.negative_slope_ || a.enc_mean_ != b.enc_mean_ ||
        a.enc_sd_ != b.enc_sd_ || a.hp_mean_ != b.hp_mean_ || a.hp_sd_ != b.hp_sd_ ||
        a.layers_.size() != b.layers_.size()) {
        return false;
    }
    return a.parameters() == b.parameters();
}

LossParts batch_loss(const Predictor& p, const Batch& batch, double alpha) {
    const Eigen::MatrixXd out = p.forward_batch(batch.inputs);
    const auto L = static_cast<Eigen::Index>(p.label_count());
    const Eigen::MatrixXd diff = out - batch.targets;
    const double b = static_cast<double>(batch.inputs.cols());
    LossParts l;
    l.overlap = diff.topRows(L).squaredNorm() / (static_cast<double>(L) * b);
    l.nfv = diff.row(L).squaredNorm() / b;
    l.total = l.overlap + alpha * l.nfv;
    return l;
}

Gradients backward(const Predictor& p, const Batch& batch, double alpha, LossParts* loss) {
    if (batch.inputs.cols() == 0) throw ConfigError("backward: empty batch");
    const auto& layers = p.layers();
    const double slope = p.negative_slope();
    std::vector<Eigen::MatrixXd> acts{batch.inputs};
    std::vector<Eigen::MatrixXd> pre;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = layers[l].weight * acts.back();
        z.colwise() += layers[l].bias;
        pre.push_back(z);
        acts.push_back(l + 1 < layers.size() ? leaky(z, slope) : z);
    }
    const auto L = static_cast<Eigen::Index>(p.label_count());
    const double b = static_cast<double>(batch.inputs.cols());
    const Eigen::MatrixXd diff = acts.back() - batch.targets;
    if (loss != nullptr) {
        loss->overlap = diff.topRows(L).squaredNorm() / (static_cast<double>(L) * b);
        loss->nfv = diff.row(L).squaredNorm() / b;
        loss->total = loss->overlap + alpha * loss->nfv;
    }
    Eigen::MatrixXd delta(diff.rows(), diff.cols());
    delta.topRows(L) = diff.topRows(L) * (2.0 / (static_cast<double>(L) * b));
    delta.row(L) = diff.row(L) * (2.0 * alpha / b);

    Gradients g;
    g.weight.resize(layers.size());
    g.bias.resize(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        g.weight[l] = delta * acts[l].transpose();
        g.bias[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (layers[l].weight.transpose() * delta).cwiseProduct(leaky_grad(pre[l - 1], slope));
        }
    }
    return g;
}

Batch make_batch(const Predictor& p, const std::vector<RegistrationRecord>& records,
                 const std::function<const Encoding&(const std::string&)>& encoding) {
    Batch batch;
    batch.inputs.resize(static_cast<Eigen::Index>(p.input_dim()), static_cast<Eigen::Index>(records.size()));
    for (std::size_t j = 0; j < records.size(); ++j) {
        batch.inputs.col(static_cast<Eigen::Index>(j)) =
            p.input_vector(encoding(records[j].pair_id), records[j].hp);
    }
    batch.targets = target_matrix(records, p.label_count());
    return batch;
}

TrainResult train(const TrainingData& data, const EncoderConfig& encoder,
                  const std::vector<std::string>& hp_names, std::uint32_t label_count,
                  const MlpConfig& mlp, const TrainConfig& cfg) {
    cfg.validate();
    if (data.train.empty()) throw ConfigError("train: no training records");
    Predictor p = Predictor::create(encoder, hp_names, label_count, mlp);

    // Normalization from the training records.
    const std::size_t enc_dim = p.encoding_dim();
    const auto n = static_cast<double>(data.train.size());
    std::vector<double> em(enc_dim, 0.0), es(enc_dim, 0.0);
    std::vector<double> hm(hp_names.size(), 0.0), hs(hp_names.size(), 0.0);
    for (const auto& r : data.train) {
        const Encoding& e = data.encoding(r.pair_id);
        if (e.values.size() != enc_dim) throw DataError("encoding length mismatch for " + r.pair_id);
        for (std::size_t i = 0; i < enc_dim; ++i) em[i] += e.values[i];
        for (std::size_t i = 0; i < hp_names.size(); ++i) hm[i] += std::log(r.hp.get(hp_names[i]));
    }
    for (double& v : em) v /= n;
    for (double& v : hm) v /= n;
    for (const auto& r : data.train) {
        const Encoding& e = data.encoding(r.pair_id);
        for (std::size_t i = 0; i < enc_dim; ++i) es[i] += (e.values[i] - em[i]) * (e.values[i] - em[i]);
        for (std::size_t i = 0; i < hp_names.size(); ++i) {
            const double d = std::log(r.hp.get(hp_names[i])) - hm[i];
            hs[i] += d * d;
        }
    }
    auto finish_sd = [n](std::vector<double>& v) {
        for (double& s : v) {
            s = std::sqrt(s / n);
            if (!(s > 1e-12)) s = 1.0;
        }
    };
    finish_sd(es);
    finish_sd(hs);
    p.set_normalization(em, es, hm, hs);

    const Batch all_train = make_batch(p, data.train, data.encoding);
    const bool has_val = !data.val.empty();
    const Batch all_val = has_val ? make_batch(p, data.val, data.encoding) : Batch{};

    MomentEstimate m, v;
    for (const auto& l : p.layers()) {
        m.w.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        v.w.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        m.b.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        v.b.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }

    TrainResult result;
    Predictor best = p;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.shuffle_seed);
    long step = 0;
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i-- > 1;) {
            std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
        }
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            Batch batch;
            batch.inputs.resize(all_train.inputs.rows(), static_cast<Eigen::Index>(end - start));
            batch.targets.resize(all_train.targets.rows(), static_cast<Eigen::Index>(end - start));
            for (std::size_t k = start; k < end; ++k) {
                const auto col = static_cast<Eigen::Index>(order[k]);
                batch.inputs.col(static_cast<Eigen::Index>(k - start)) = all_train.inputs.col(col);
                batch.targets.col(static_cast<Eigen::Index>(k - start)) = all_train.targets.col(col);
            }
            LossParts loss;
            const Gradients g = backward(p, batch, cfg.alpha, &loss);
            if (!std::isfinite(loss.total)) {
                throw NumericalError("training loss is non-finite at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batch_index));
            }
            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            auto& layers = p.layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                m.w[l] = cfg.beta1 * m.w[l] + (1.0 - cfg.beta1) * g.weight[l];
                v.w[l] = cfg.beta2 * v.w[l] + (1.0 - cfg.beta2) * g.weight[l].cwiseProduct(g.weight[l]);
                m.b[l] = cfg.beta1 * m.b[l] + (1.0 - cfg.beta1) * g.bias[l];
                v.b[l] = cfg.beta2 * v.b[l] + (1.0 - cfg.beta2) * g.bias[l].cwiseProduct(g.bias[l]);
                layers[l].weight.array() -= cfg.learning_rate * (m.w[l].array() / c1) /
                                            ((v.w[l].array() / c2).sqrt() + cfg.epsilon);
                layers[l].bias.array() -= cfg.learning_rate * (m.b[l].array() / c1) /
                                          ((v.b[l].array() / c2).sqrt() + cfg.epsilon);
            }
        }
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = batch_loss(p, all_train, cfg.alpha).total;
        entry.val_loss = has_val ? batch_loss(p, all_val, cfg.alpha).total : entry.train_loss;
        if (!std::isfinite(entry.train_loss) || !std::isfinite(entry.val_loss)) {
            throw NumericalError("training loss is non-finite after epoch " + std::to_string(epoch));
        }
        result.log.push_back(entry);
        if (entry.val_loss < best_val) {
            best_val = entry.val_loss;
            best = p;
            result.best_epoch = epoch;
        }
    }
    result.predictor = cfg.epochs > 0 ? std::move(best) : std::move(p);
    return result;
}

std::vector<double> sample_lognormal(double mu, double sigma, int n, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw ConfigError("sample_lognormal: sigma must be >= 0");
    if (n < 1) throw ConfigError("sample_lognormal: n must be >= 1");
    Rng rng(seed);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (double& v : out) v = std::exp(mu + sigma * rng.normal());
    return out;
}

std::vector<HyperparamPoint> sample_hyperparams(HyperparamMode mode, double mu, double sigma, int n,
                                                std::uint64_t seed, int spacing) {
    const auto names = mode_search_names(mode);
    const auto draws = sample_lognormal(mu, sigma, n * static_cast<int>(names.size()), seed);
    std::vector<HyperparamPoint> out(static_cast<std::size_t>(n));
    std::size_t k = 0;
    for (auto& hp : out) {
        for (const auto& name : names) hp.set(name, draws[k++]);
        if (mode == HyperparamMode::multi) hp.set("sx", spacing);
    }
    return out;
}

}  // namespace hyperpredict

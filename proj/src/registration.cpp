#include "hyperpredict/registration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "hyperpredict/errors.hpp"

namespace hyperpredict {

namespace {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// Displacement field parameterized on a control grid with integer spacing;
// the dense field is the bilinear interpolation of the control vectors.
struct ControlGrid {
    Shape dense;
    int spacing = 1;
    DisplacementField params;

    static Shape control_shape(Shape dense, int spacing) {
        auto k = [&](int n) { return (n - 1 + spacing - 1) / spacing + 1; };
        return {std::max(2, k(dense.nx)), std::max(2, k(dense.ny))};
    }

    ControlGrid(Shape dense_shape, int s)
        : dense(dense_shape), spacing(s), params(s == 1 ? dense_shape : control_shape(dense_shape, s)) {}

    struct Tap {
        int i0;
        double t;
    };

    [[nodiscard]] Tap tap(int p, int k) const {
        const double c = static_cast<double>(p) / spacing;
        const int i0 = std::min(static_cast<int>(std::floor(c)), k - 2);
        return {i0, c - i0};
    }

    [[nodiscard]] DisplacementField expand() const {
        if (spacing == 1) return params;
        DisplacementField out(dense);
        for (int y = 0; y < dense.ny; ++y) {
            const Tap ty = tap(y, params.ny());
            for (int x = 0; x < dense.nx; ++x) {
                const Tap tx = tap(x, params.nx());
                const Vec2 a = params(tx.i0, ty.i0);
                const Vec2 b = params(tx.i0 + 1, ty.i0);
                const Vec2 c = params(tx.i0, ty.i0 + 1);
                const Vec2 d = params(tx.i0 + 1, ty.i0 + 1);
                const double w00 = (1 - tx.t) * (1 - ty.t);
                const double w10 = tx.t * (1 - ty.t);
                const double w01 = (1 - tx.t) * ty.t;
                const double w11 = tx.t * ty.t;
                out(x, y) = {w00 * a.x + w10 * b.x + w01 * c.x + w11 * d.x,
                             w00 * a.y + w10 * b.y + w01 * c.y + w11 * d.y};
            }
        }
        return out;
    }

    // Adjoint of expand(): scatters a dense gradient onto control vectors.
    [[nodiscard]] DisplacementField adjoint(const DisplacementField& dense_grad) const {
        if (spacing == 1) return dense_grad;
        DisplacementField out(params.shape());
        for (int y = 0; y < dense.ny; ++y) {
            const Tap ty = tap(y, params.ny());
            for (int x = 0; x < dense.nx; ++x) {
                const Tap tx = tap(x, params.nx());
                const Vec2 g = dense_grad(x, y);
                out(tx.i0, ty.i0) += ((1 - tx.t) * (1 - ty.t)) * g;
                out(tx.i0 + 1, ty.i0) += (tx.t * (1 - ty.t)) * g;
                out(tx.i0, ty.i0 + 1) += ((1 - tx.t) * ty.t) * g;
                out(tx.i0 + 1, ty.i0 + 1) += (tx.t * ty.t) * g;
            }
        }
        return out;
    }

    // Sets control vectors by sampling a dense field at control locations.
    void fit(const DisplacementField& dense_field) {
        if (spacing == 1) {
            params = dense_field;
            return;
        }
        for (int y = 0; y < params.ny(); ++y) {
            for (int x = 0; x < params.nx(); ++x) {
                params(x, y) = dense_field(std::min(x * spacing, dense.nx - 1),
                                           std::min(y * spacing, dense.ny - 1));
            }
        }
    }
};

struct Level {
    ScalarGrid fixed;
    ScalarGrid moving;
};

struct Objective {
    const Level& level;
    Similarity similarity;
    std::vector<std::pair<Regularizer, double>> weights;

    [[nodiscard]] LossTerms value(const DisplacementField& u) const {
        LossTerms t;
        t.similarity = similarity_loss(level.fixed, warp(level.moving, u, Interpolation::linear),
                                       similarity);
        for (const auto& [kind, w] : weights) t.regularization += w * regularizer_energy(u, kind);
        return t;
    }

    LossTerms value_and_gradient(const DisplacementField& u, DisplacementField& grad) const {
        grad = DisplacementField(u.shape());
        LossTerms t;
        t.similarity = similarity_and_gradient(level.fixed, level.moving, u, similarity, grad);
        for (const auto& [kind, w] : weights) {
            t.regularization += w * regularizer_energy_and_gradient(u, kind, w, grad);
        }
        return t;
    }
};

bool finite(const LossTerms& t) { return std::isfinite(t.similarity) && std::isfinite(t.regularization); }

int spacing_for_level(int spacing, int levels_below) {
    double s = spacing;
    for (int i = 0; i < levels_below; ++i) s *= 0.5;
    return std::max(1, static_cast<int>(std::lround(s)));
}

// Backtracking gradient descent on one pyramid level. Returns the number of
// trial steps taken.
int descend(const Objective& obj, ControlGrid& grid, const RegistrationConfig& cfg, LossTerms& loss) {
    const double n = static_cast<double>(grid.dense.size());
    DisplacementField u = grid.expand();
    DisplacementField dense_grad;
    loss = obj.value_and_gradient(u, dense_grad);
    if (!finite(loss) || !all_finite(dense_grad)) {
        throw RegistrationDivergence("registration: non-finite loss at level start", u);
    }
    DisplacementField g = grid.adjoint(dense_grad);
    double step = cfg.step_size;
    int trials = 0;
    const double min_step = cfg.step_size * 1e-9;
    while (trials < cfg.iterations && step > min_step) {
        ++trials;
        ControlGrid trial = grid;
        for (std::size_t i = 0; i < g.size(); ++i) {
            trial.params[i] = trial.params[i] - (step * n) * g[i];
        }
        const DisplacementField tu = trial.expand();
        const LossTerms tl = obj.value(tu);
        if (!finite(tl) || tl.total() > loss.total()) {
            step *= 0.5;
            continue;
        }
        const double rel = (loss.total() - tl.total()) / std::max(std::abs(loss.total()), 1e-300);
        grid = std::move(trial);
        loss = obj.value_and_gradient(tu, dense_grad);
        if (!finite(loss) || !all_finite(dense_grad)) {
            throw RegistrationDivergence("registration: non-finite gradient", tu);
        }
        g = grid.adjoint(dense_grad);
        step *= 1.25;
        if (rel < cfg.tolerance) break;
    }
    return trials;
}

}  // namespace

double HyperparamPoint::get(const std::string& name) const {
    const auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("hyperparameter '" + name + "' missing");
    return it->second;
}

std::optional<double> HyperparamPoint::find(const std::string& name) const {
    const auto it = values_.find(name);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string HyperparamPoint::key() const {
    std::string out;
    for (const auto& [name, v] : values_) {
        if (!out.empty()) out += ';';
        out += name + "=" + format_double(v);
    }
    return out;
}

const char* mode_name(HyperparamMode mode) {
    return mode == HyperparamMode::single ? "single" : "multi";
}

HyperparamMode parse_mode(const std::string& name) {
    if (name == "single") return HyperparamMode::single;
    if (name == "multi") return HyperparamMode::multi;
    throw ConfigError("unknown hyperparameter mode '" + name + "' (expected single or multi)");
}

std::vector<std::string> mode_schema(HyperparamMode mode) {
    if (mode == HyperparamMode::single) return {"lambda"};
    return {"be", "le", "sx"};
}

std::vector<std::string> mode_search_names(HyperparamMode mode) {
    if (mode == HyperparamMode::single) return {"lambda"};
    return {"be", "le"};
}

bool is_regularization_weight(const std::string& name) { return name != "sx"; }

void RegistrationConfig::validate() const {
    if (iterations < 1) throw ConfigError("registration: iterations must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("registration: step size must be > 0");
    if (levels < 1) throw ConfigError("registration: levels must be >= 1");
    if (!(tolerance >= 0.0)) throw ConfigError("registration: tolerance must be >= 0");
    if (default_spacing < 1) throw ConfigError("registration: default spacing must be >= 1");
}

void RegistrationConfig::check_hyperparams(const HyperparamPoint& hp) const {
    const auto schema = mode_schema(mode);
    for (const auto& [name, v] : hp.values()) {
        if (std::find(schema.begin(), schema.end(), name) == schema.end()) {
            throw ConfigError(std::string("hyperparameter '") + name + "' is not valid in " +
                              mode_name(mode) + " mode");
        }
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError("hyperparameter '" + name + "' must be a positive finite value");
        }
    }
    for (const auto& name : mode_search_names(mode)) {
        if (!hp.contains(name)) throw ConfigError("hyperparameter '" + name + "' missing");
    }
}

double similarity_loss(const ScalarGrid& fixed, const ScalarGrid& warped, Similarity kind) {
    if (fixed.shape() != warped.shape()) throw ConfigError("similarity_loss: shape mismatch");
    const double n = static_cast<double>(fixed.size());
    if (kind == Similarity::mse) {
        double acc = 0.0;
        for (std::size_t i = 0; i < fixed.size(); ++i) {
            const double d = warped[i] - fixed[i];
            acc += d * d;
        }
        return acc / n;
    }
    double mf = 0.0;
    double mw = 0.0;
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        mf += fixed[i];
        mw += warped[i];
    }
    mf /= n;
    mw /= n;
    double sff = 0.0;
    double sww = 0.0;
    double sfw = 0.0;
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        const double a = fixed[i] - mf;
        const double b = warped[i] - mw;
        sff += a * a;
        sww += b * b;
        sfw += a * b;
    }
    if (sff <= 0.0 || sww <= 0.0) throw NumericalError("ncc: zero-variance image");
    return 1.0 - sfw / std::sqrt(sff * sww);
}

double similarity_and_gradient(const ScalarGrid& fixed, const ScalarGrid& moving,
                               const DisplacementField& field, Similarity kind,
                               DisplacementField& grad) {
    const Shape s = fixed.shape();
    if (moving.shape() != s || field.shape() != s) {
        throw ConfigError("similarity_and_gradient: shape mismatch");
    }
    const double n = static_cast<double>(s.size());
    ScalarGrid warped(s);
    VectorGrid dw(s);
    for (int y = 0; y < s.ny; ++y) {
        for (int x = 0; x < s.nx; ++x) {
            const Vec2 u = field(x, y);
            Vec2 g;
            warped(x, y) = sample_linear(moving, x + u.x, y + u.y, &g);
            dw(x, y) = g;
        }
    }
    if (kind == Similarity::mse) {
        double acc = 0.0;
        for (std::size_t i = 0; i < warped.size(); ++i) {
            const double d = warped[i] - fixed[i];
            acc += d * d;
            grad[i] += (2.0 * d / n) * dw[i];
        }
        return acc / n;
    }
    double mf = 0.0;
    double mw = 0.0;
    for (std::size_t i = 0; i < warped.size(); ++i) {
        mf += fixed[i];
        mw += warped[i];
    }
    mf /= n;
    mw /= n;
    double sff = 0.0;
    double sww = 0.0;
    double sfw = 0.0;
    for (std::size_t i = 0; i < warped.size(); ++i) {
        const double a = fixed[i] - mf;
        const double b = warped[i] - mw;
        sff += a * a;
        sww += b * b;
        sfw += a * b;
    }
    if (sff <= 0.0 || sww <= 0.0) throw NumericalError("ncc: zero-variance image");
    const double denom = std::sqrt(sff * sww);
    const double ncc = sfw / denom;
    // d(ncc)/dw_i = a_i / denom - ncc * b_i / sww ; loss = 1 - ncc
    for (std::size_t i = 0; i < warped.size(); ++i) {
        const double a = fixed[i] - mf;
        const double b = warped[i] - mw;
        const double dl = -(a / denom - ncc * b / sww);
        grad[i] += dl * dw[i];
    }
    return 1.0 - ncc;
}

namespace {

// Accumulates w * r^2 for linear stencils r over the field, with optional
// gradient scatter. Stencil entries address (cell index, component).
class StencilAccumulator {
public:
    StencilAccumulator(const DisplacementField& u, double grad_scale, DisplacementField* grad)
        : u_(u), grad_scale_(grad_scale), grad_(grad) {}

    struct Tap {
        std::size_t cell;
        int comp;  // 0 = x, 1 = y
        double coeff;
    };

    template <std::size_t K>
    void add(double weight, const Tap (&taps)[K]) {
        double r = 0.0;
        for (const Tap& t : taps) r += t.coeff * component(u_[t.cell], t.comp);
        energy_ += weight * r * r;
        if (grad_ != nullptr) {
            const double g = grad_scale_ * 2.0 * weight * r / static_cast<double>(u_.size());
            for (const Tap& t : taps) component((*grad_)[t.cell], t.comp) += g * t.coeff;
        }
    }

    [[nodiscard]] double energy() const { return energy_ / static_cast<double>(u_.size()); }

private:
    static double component(const Vec2& v, int c) { return c == 0 ? v.x : v.y; }
    static double& component(Vec2& v, int c) { return c == 0 ? v.x : v.y; }

    const DisplacementField& u_;
    double grad_scale_;
    DisplacementField* grad_;
    double energy_ = 0.0;
};

double regularizer_impl(const DisplacementField& u, Regularizer kind, double scale,
                        DisplacementField* grad) {
    const Shape s = u.shape();
    StencilAccumulator acc(u, scale, grad);
    auto at = [&](int x, int y) { return s.index(x, y); };
    switch (kind) {
        case Regularizer::diffusion:
            for (int y = 0; y < s.ny; ++y) {
                for (int x = 0; x < s.nx; ++x) {
                    for (int c = 0; c < 2; ++c) {
                        if (x + 1 < s.nx) acc.add(1.0, {{at(x + 1, y), c, 1.0}, {at(x, y), c, -1.0}});
                        if (y + 1 < s.ny) acc.add(1.0, {{at(x, y + 1), c, 1.0}, {at(x, y), c, -1.0}});
                    }
                }
            }
            break;
        case Regularizer::bending:
            for (int y = 0; y < s.ny; ++y) {
                for (int x = 0; x < s.nx; ++x) {
                    for (int c = 0; c < 2; ++c) {
                        if (x >= 1 && x + 1 < s.nx) {
                            acc.add(1.0, {{at(x + 1, y), c, 1.0}, {at(x, y), c, -2.0}, {at(x - 1, y), c, 1.0}});
                        }
                        if (y >= 1 && y + 1 < s.ny) {
                            acc.add(1.0, {{at(x, y + 1), c, 1.0}, {at(x, y), c, -2.0}, {at(x, y - 1), c, 1.0}});
                        }
                        if (x + 1 < s.nx && y + 1 < s.ny) {
                            acc.add(2.0, {{at(x + 1, y + 1), c, 1.0},
                                          {at(x + 1, y), c, -1.0},
                                          {at(x, y + 1), c, -1.0},
                                          {at(x, y), c, 1.0}});
                        }
                    }
                }
            }
            break;
        case Regularizer::elastic:
            for (int y = 0; y + 1 < s.ny; ++y) {
                for (int x = 0; x + 1 < s.nx; ++x) {
                    acc.add(1.0, {{at(x + 1, y), 0, 1.0}, {at(x, y), 0, -1.0}});  // e_xx
                    acc.add(1.0, {{at(x, y + 1), 1, 1.0}, {at(x, y), 1, -1.0}});  // e_yy
                    acc.add(2.0, {{at(x, y + 1), 0, 0.5},                         // e_xy
                                  {at(x, y), 0, -0.5},
                                  {at(x + 1, y), 1, 0.5},
                                  {at(x, y), 1, -0.5}});
                }
            }
            break;
    }
    return acc.energy();
}

}  // namespace

double regularizer_energy(const DisplacementField& field, Regularizer kind) {
    return regularizer_impl(field, kind, 1.0, nullptr);
}

double regularizer_energy_and_gradient(const DisplacementField& field, Regularizer kind,
                                       double scale, DisplacementField& grad) {
    if (grad.shape() != field.shape()) grad = DisplacementField(field.shape());
    return regularizer_impl(field, kind, scale, &grad);
}

std::vector<std::pair<Regularizer, double>> regularization_weights(const HyperparamPoint& hp,
                                                                   HyperparamMode mode) {
    if (mode == HyperparamMode::single) return {{Regularizer::diffusion, hp.get("lambda")}};
    return {{Regularizer::bending, hp.get("be")}, {Regularizer::elastic, hp.get("le")}};
}

LossTerms evaluate_loss(const ImagePair& pair, const DisplacementField& field,
                        const HyperparamPoint& hp, const RegistrationConfig& cfg) {
    const Level level{pair.fixed, pair.moving};
    const Objective obj{level, cfg.similarity, regularization_weights(hp, cfg.mode)};
    return obj.value(field);
}

RegistrationResult register_pair(const ImagePair& pair, const HyperparamPoint& hp,
                                 const RegistrationConfig& cfg) {
    cfg.validate();
    cfg.check_hyperparams(hp);
    if (pair.moving.shape() != pair.fixed.shape()) throw ConfigError("register: shape mismatch");

    int spacing = 1;
    if (cfg.mode == HyperparamMode::multi) {
        spacing = std::max(1, static_cast<int>(std::lround(hp.find("sx").value_or(cfg.default_spacing))));
    }
    const auto weights = regularization_weights(hp, cfg.mode);

    // Pyramid, finest last.
    std::vector<Level> pyramid{{pair.fixed, pair.moving}};
    while (static_cast<int>(pyramid.size()) < cfg.levels) {
        const Level& top = pyramid.back();
        if (top.fixed.nx() < 2 * kMinAxis || top.fixed.ny() < 2 * kMinAxis) break;
        pyramid.push_back({downsample2(top.fixed), downsample2(top.moving)});
    }
    std::reverse(pyramid.begin(), pyramid.end());

    RegistrationResult result;
    const Level& finest = pyramid.back();
    const Objective finest_obj{finest, cfg.similarity, weights};
    const DisplacementField zero(finest.fixed.shape());
    result.initial_loss = finest_obj.value(zero);

    DisplacementField dense;
    for (std::size_t l = 0; l < pyramid.size(); ++l) {
        const Level& level = pyramid[l];
        const Objective obj{level, cfg.similarity, weights};
        const int levels_below = static_cast<int>(pyramid.size() - 1 - l);
        ControlGrid grid(level.fixed.shape(), spacing_for_level(spacing, levels_below));
        if (l > 0) {
            DisplacementField up = upsample_field(dense, level.fixed.shape(), 2.0);
            grid.fit(up);
            // The descent never ends above its start; starting from whichever
            // of the upsampled and zero fields is better extends that to the
            // zero field at full resolution.
            if (l + 1 == pyramid.size() &&
                !(obj.value(grid.expand()).total() <= result.initial_loss.total())) {
                grid.fit(zero);
            }
        }
        LossTerms loss;
        result.iterations += descend(obj, grid, cfg, loss);
        dense = grid.expand();
        result.loss = loss;
    }
    result.field = std::move(dense);
    return result;
}

RegistrationTargets evaluate_registration(const ImagePair& pair, const DisplacementField& field,
                                          std::uint32_t label_count) {
    const LabelGrid warped = warp_labels(pair.moving_labels, field);
    RegistrationTargets t;
    t.metrics.dice = dice_all(pair.fixed_labels, warped, label_count);
    const FoldCount fc = count_folded(jacobian_determinant(field));
    t.nfv = fc.count;
    t.metrics.nfv_percent = fc.percent;
    return t;
}

}  // namespace hyperpredict

#include "ecotrain/trainers.hpp"

#include <poll.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include "ecotrain/csv.hpp"
#include "ecotrain/error.hpp"
#include "ecotrain/protocol.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

std::pair<std::string, std::map<std::string, std::string>> parse_task_spec(const std::string& task) {
    std::map<std::string, std::string> options;
    const auto colon = task.find(':');
    std::string name = task.substr(0, colon);
    if (colon != std::string::npos) {
        for (auto part : split(std::string_view(task).substr(colon + 1), ',')) {
            part = trim(part);
            if (part.empty()) continue;
            const auto eq = part.find('=');
            if (eq == std::string_view::npos || eq == 0) {
                throw ValidationError("task", "option '" + std::string(part) + "' is not key=value");
            }
            options[std::string(trim(part.substr(0, eq)))] = std::string(trim(part.substr(eq + 1)));
        }
    }
    return {name, options};
}

namespace {

double option_double(const std::map<std::string, std::string>& o, const std::string& key, double fallback) {
    auto it = o.find(key);
    if (it == o.end()) return fallback;
    auto v = parse_double(it->second);
    if (!v || !std::isfinite(*v)) throw ValidationError("task." + key, "not a number: '" + it->second + "'");
    return *v;
}

std::size_t option_size(const std::map<std::string, std::string>& o, const std::string& key, std::size_t fallback) {
    auto it = o.find(key);
    if (it == o.end()) return fallback;
    auto v = parse_int(it->second);
    if (!v || *v < 0) throw ValidationError("task." + key, "not a non-negative integer: '" + it->second + "'");
    return static_cast<std::size_t>(*v);
}

std::uint64_t mix_seed(std::int64_t seed, std::size_t size, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(static_cast<std::uint64_t>(seed) >> 32),
                      static_cast<std::uint32_t>(size), static_cast<std::uint32_t>(salt)};
    std::uint64_t out[1];
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    out[0] = (std::uint64_t(words[0]) << 32) | words[1];
    return out[0];
}

}  // namespace

// --- surrogate -------------------------------------------------------------

SurrogateParams SurrogateParams::from_task(const std::string& task) {
    auto [name, o] = parse_task_spec(task);
    if (name != "surrogate") {
        throw ValidationError("task", "surrogate trainer expects a 'surrogate[:key=value,...]' task, got '" + task + "'");
    }
    for (const auto& [k, _] : o) {
        if (k != "a_max" && k != "tau" && k != "noise" && k != "onset" && k != "decline" && k != "gap") {
            throw ValidationError("task." + k, "unknown surrogate option");
        }
    }
    SurrogateParams p;
    p.a_max = option_double(o, "a_max", p.a_max);
    p.tau = option_double(o, "tau", p.tau);
    p.noise = option_double(o, "noise", p.noise);
    if (o.count("onset")) p.onset = option_size(o, "onset", 0);
    p.decline = option_double(o, "decline", p.decline);
    p.gap = option_double(o, "gap", p.gap);
    if (!(p.a_max > 0.0 && p.a_max <= 1.0)) throw ValidationError("task.a_max", "must be in (0, 1]");
    if (!(p.tau > 0.0)) throw ValidationError("task.tau", "must be > 0");
    if (!(p.noise >= 0.0)) throw ValidationError("task.noise", "must be >= 0");
    if (!(p.decline >= 0.0)) throw ValidationError("task.decline", "must be >= 0");
    if (!(p.gap >= 0.0)) throw ValidationError("task.gap", "must be >= 0");
    return p;
}

Surrogate::Surrogate(SurrogateParams params, std::size_t size, std::int64_t seed)
    : params_(params), rng_(mix_seed(seed, size, 0x5u)) {}

std::pair<double, double> Surrogate::expected(std::size_t epoch) const {
    auto rise = [&](std::size_t e) { return 1.0 - std::exp(-static_cast<double>(e + 1) / params_.tau); };
    const double train = (params_.a_max + params_.gap) * rise(epoch);
    double eval;
    if (params_.onset && epoch > *params_.onset) {
        eval = params_.a_max * rise(*params_.onset) - params_.decline * static_cast<double>(epoch - *params_.onset);
    } else {
        eval = params_.a_max * rise(epoch);
    }
    return {std::clamp(train, 0.0, 1.0), std::clamp(eval, 0.0, 1.0)};
}

std::pair<double, double> Surrogate::epoch(std::size_t epoch) {
    auto [train, eval] = expected(epoch);
    if (params_.noise > 0.0) {
        std::normal_distribution<double> n(0.0, params_.noise);
        train += n(rng_);
        eval += n(rng_);
    }
    return {std::clamp(train, 0.0, 1.0), std::clamp(eval, 0.0, 1.0)};
}

// --- tinynet ---------------------------------------------------------------

Dataset load_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("dataset not found: " + path.string());
    const CsvTable table = read_csv(path);
    if (table.header.size() < 2 || table.header.back() != "label") {
        throw ParseError(path.string(), 1, "expected feature columns followed by 'label'");
    }
    const auto d = static_cast<Eigen::Index>(table.header.size() - 1);
    Dataset out;
    out.x.resize(static_cast<Eigen::Index>(table.rows.size()), d);
    out.y.resize(static_cast<Eigen::Index>(table.rows.size()));
    int max_label = -1;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        for (Eigen::Index c = 0; c < d; ++c) {
            auto v = parse_double(row.fields[static_cast<std::size_t>(c)]);
            if (!v || !std::isfinite(*v)) throw ParseError(path.string(), row.line, "bad feature value");
            out.x(static_cast<Eigen::Index>(r), c) = *v;
        }
        auto label = parse_int(row.fields.back());
        if (!label || *label < 0 || *label > 1000) throw ParseError(path.string(), row.line, "bad label");
        out.y(static_cast<Eigen::Index>(r)) = static_cast<int>(*label);
        max_label = std::max(max_label, static_cast<int>(*label));
    }
    out.classes = max_label + 1;
    if (out.classes < 2) throw Error("dataset " + path.string() + " needs at least two classes");
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& all, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvariantError("train_fraction must be in (0, 1)");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(all.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
    auto take = [&](std::size_t from, std::size_t to) {
        Dataset d;
        d.classes = all.classes;
        d.x.resize(static_cast<Eigen::Index>(to - from), all.x.cols());
        d.y.resize(static_cast<Eigen::Index>(to - from));
        for (std::size_t i = from; i < to; ++i) {
            d.x.row(static_cast<Eigen::Index>(i - from)) = all.x.row(order[i]);
            d.y(static_cast<Eigen::Index>(i - from)) = all.y(order[i]);
        }
        return d;
    };
    return {take(0, n_train), take(n_train, order.size())};
}

TinyNetOptions TinyNetOptions::from_task_options(const std::map<std::string, std::string>& o) {
    TinyNetOptions t;
    for (const auto& [k, v] : o) {
        if (k != "lr" && k != "batch" && k != "hidden") throw ValidationError("task." + k, "unknown tinynet option");
    }
    t.learning_rate = option_double(o, "lr", t.learning_rate);
    t.batch_size = option_size(o, "batch", t.batch_size);
    if (auto it = o.find("hidden"); it != o.end()) {
        t.base_hidden.clear();
        for (auto part : split(it->second, 'x')) {
            auto w = parse_int(part);
            if (!w || *w < 1) throw ValidationError("task.hidden", "expected widths like 16x8");
            t.base_hidden.push_back(static_cast<int>(*w));
        }
    }
    if (!(t.learning_rate >= 0.0)) throw ValidationError("task.lr", "must be >= 0");
    if (t.batch_size < 1) throw ValidationError("task.batch", "must be >= 1");
    return t;
}

TinyNet::TinyNet(int inputs, const std::vector<int>& hidden, int classes, std::uint64_t seed) : rng_(seed) {
    std::vector<int> widths{inputs};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(classes);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        Layer l;
        const double limit = std::sqrt(6.0 / widths[i]);
        std::uniform_real_distribution<double> u(-limit, limit);
        l.w = Eigen::MatrixXd::NullaryExpr(widths[i], widths[i + 1], [&] { return u(rng_); });
        l.b = Eigen::RowVectorXd::Zero(widths[i + 1]);
        l.mw = l.vw = Eigen::MatrixXd::Zero(widths[i], widths[i + 1]);
        l.mb = l.vb = Eigen::RowVectorXd::Zero(widths[i + 1]);
        layers_.push_back(std::move(l));
    }
}

std::vector<int> TinyNet::scaled_widths(const std::vector<int>& base, std::size_t multiplier) {
    std::vector<int> out;
    for (int w : base) out.push_back(w * static_cast<int>(multiplier));
    return out;
}

namespace {

Eigen::MatrixXd softmax_rows(Eigen::MatrixXd z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        z.row(r).array() -= z.row(r).maxCoeff();
        z.row(r) = z.row(r).array().exp().matrix();
        z.row(r) /= z.row(r).sum();
    }
    return z;
}

}  // namespace

Eigen::MatrixXd TinyNet::forward(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Eigen::MatrixXd z = (a * layers_[i].w).rowwise() + layers_[i].b;
        a = i + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    }
    return softmax_rows(std::move(a));
}

double TinyNet::accuracy(const Dataset& data) const {
    if (data.rows() == 0) return 0.0;
    const Eigen::MatrixXd p = forward(data.x);
    Eigen::Index hits = 0;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        Eigen::Index arg;
        p.row(r).maxCoeff(&arg);
        if (arg == data.y(r)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.rows());
}

void TinyNet::train_epoch(const Dataset& data, double learning_rate, std::size_t batch_size) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const auto n = static_cast<Eigen::Index>(std::min(batch_size, order.size() - start));
        Eigen::MatrixXd x(n, data.x.cols());
        Eigen::MatrixXd target = Eigen::MatrixXd::Zero(n, layers_.back().w.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto src = order[start + static_cast<std::size_t>(i)];
            x.row(i) = data.x.row(src);
            target(i, data.y(src)) = 1.0;
        }

        std::vector<Eigen::MatrixXd> acts{x};
        std::vector<Eigen::MatrixXd> pre;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            Eigen::MatrixXd z = (acts.back() * layers_[i].w).rowwise() + layers_[i].b;
            pre.push_back(z);
            acts.push_back(i + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : softmax_rows(z));
        }

        ++steps_;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
        Eigen::MatrixXd delta = (acts.back() - target) / static_cast<double>(n);
        for (std::size_t k = layers_.size(); k-- > 0;) {
            auto& l = layers_[k];
            const Eigen::MatrixXd gw = acts[k].transpose() * delta;
            const Eigen::RowVectorXd gb = delta.colwise().sum();
            if (k > 0) {
                delta = (delta * l.w.transpose()).cwiseProduct(
                    pre[k - 1].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
            }
            l.mw = beta1 * l.mw + (1 - beta1) * gw;
            l.vw = beta2 * l.vw + (1 - beta2) * gw.cwiseProduct(gw);
            l.mb = beta1 * l.mb + (1 - beta1) * gb;
            l.vb = beta2 * l.vb + (1 - beta2) * gb.cwiseProduct(gb);
            l.w.array() -= learning_rate * (l.mw.array() / c1) / ((l.vw.array() / c2).sqrt() + eps);
            l.b.array() -= learning_rate * (l.mb.array() / c1) / ((l.vb.array() / c2).sqrt() + eps);
        }
    }
}

std::vector<std::size_t> TinyNet::layer_parameter_counts() const {
    std::vector<std::size_t> out;
    for (const auto& l : layers_) out.push_back(static_cast<std::size_t>(l.w.size() + l.b.size()));
    return out;
}

std::size_t TinyNet::parameter_count() const {
    auto counts = layer_parameter_counts();
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::filesystem::path resolve_dataset(const std::string& name, const std::filesystem::path& data_dir) {
    if (name.find('/') != std::string::npos || (name.size() > 4 && name.substr(name.size() - 4) == ".csv")) {
        return name;
    }
    return data_dir / (name + ".csv");
}

// --- trainer process side ----------------------------------------------------

namespace {

/// Non-blocking check of stdin for a stop command.
class StopWatcher {
public:
    explicit StopWatcher(int fd) : fd_(fd) {}

    bool stop_requested() {
        while (fd_ >= 0 && !stopped_) {
            pollfd p{fd_, POLLIN, 0};
            if (::poll(&p, 1, 0) <= 0) break;
            char buf[512];
            const ssize_t n = ::read(fd_, buf, sizeof buf);
            if (n <= 0) {
                fd_ = -1;  // harness closed stdin; keep training
                break;
            }
            buffer_.append(buf, static_cast<std::size_t>(n));
            std::size_t nl;
            while ((nl = buffer_.find('\n')) != std::string::npos) {
                if (is_stop_command(buffer_.substr(0, nl)).value_or(false)) stopped_ = true;
                buffer_.erase(0, nl + 1);
            }
        }
        return stopped_;
    }

private:
    int fd_;
    bool stopped_ = false;
    std::string buffer_;
};

}  // namespace

int run_trainer_loop(const std::function<std::pair<double, double>(std::size_t)>& epoch_fn, const TrainerArgs& args,
                     std::ostream& out, int stdin_fd) {
    StopWatcher watcher(stdin_fd);
    double train = 0.0;
    double eval = 0.0;
    for (std::size_t epoch = 0; epoch < args.max_epochs; ++epoch) {
        if (watcher.stop_requested()) break;
        std::tie(train, eval) = epoch_fn(epoch);
        if (args.epoch_delay.count() > 0) std::this_thread::sleep_for(args.epoch_delay);
        out << serialize_event(TrainerEvent::epoch_end(epoch, train, eval)) << '\n' << std::flush;
        if (!out) return 1;
    }
    out << serialize_event(TrainerEvent::final_result(train, eval)) << '\n' << std::flush;
    return out ? 0 : 1;
}

}  // namespace ecotrain

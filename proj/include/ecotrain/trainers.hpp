#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ecotrain {

/// Arguments every trainer receives from the harness.
struct TrainerArgs {
    std::size_t size = 1;
    std::string task;
    std::int64_t seed = 0;
    std::size_t max_epochs = 1000;
    std::chrono::milliseconds epoch_delay{0};  // pacing for the surrogate
    std::filesystem::path data_dir;
};

/// `name:key=value,key=value` -> name plus options. Bare `name` has none.
std::pair<std::string, std::map<std::string, std::string>> parse_task_spec(const std::string& task);

// --- surrogate -------------------------------------------------------------

/// Closed-form learning curves. Training accuracy saturates at a_max + gap;
/// evaluation accuracy follows the same curve up to `onset` and then loses
/// `decline` per epoch.
struct SurrogateParams {
    double a_max = 0.9;
    double tau = 5.0;
    double noise = 0.0;
    std::optional<std::size_t> onset;
    double decline = 0.0;
    double gap = 0.02;

    /// Parses `surrogate[:a_max=..,tau=..,noise=..,onset=..,decline=..,gap=..]`.
    static SurrogateParams from_task(const std::string& task);
};

class Surrogate {
public:
    Surrogate(SurrogateParams params, std::size_t size, std::int64_t seed);

    /// Noise-free (train, eval) accuracy after `epoch`.
    std::pair<double, double> expected(std::size_t epoch) const;
    /// expected() plus seeded Gaussian noise, clamped to [0, 1].
    std::pair<double, double> epoch(std::size_t epoch);

    const SurrogateParams& params() const { return params_; }

private:
    SurrogateParams params_;
    std::mt19937_64 rng_;
};

// --- tinynet ---------------------------------------------------------------

struct Dataset {
    Eigen::MatrixXd x;  // one sample per row
    Eigen::VectorXi y;
    int classes = 0;

    Eigen::Index rows() const { return x.rows(); }
};

/// Reads `x0,...,x{d-1},label` CSV. Throws ParseError on malformed rows and
/// Error when the file is missing or has fewer than two classes.
Dataset load_dataset(const std::filesystem::path& path);

/// Deterministic split: first `train_fraction` of a fixed permutation.
std::pair<Dataset, Dataset> split_dataset(const Dataset& all, double train_fraction, std::uint64_t seed = 0);

struct TinyNetOptions {
    std::vector<int> base_hidden{16, 8};
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    double train_fraction = 0.7;

    /// Reads lr, batch and hidden (e.g. hidden=32x16) from task options.
    static TinyNetOptions from_task_options(const std::map<std::string, std::string>& options);
};

/// Fully connected ReLU network with a softmax output, trained by Adam.
/// Hidden widths are the base widths times the size multiplier.
class TinyNet {
public:
    TinyNet(int inputs, const std::vector<int>& hidden, int classes, std::uint64_t seed);

    static std::vector<int> scaled_widths(const std::vector<int>& base, std::size_t multiplier);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;  // class probabilities
    double accuracy(const Dataset& data) const;
    /// One pass over `data` in shuffled mini-batches.
    void train_epoch(const Dataset& data, double learning_rate, std::size_t batch_size);

    std::vector<std::size_t> layer_parameter_counts() const;
    std::size_t parameter_count() const;

private:
    struct Layer {
        Eigen::MatrixXd w;
        Eigen::RowVectorXd b;
        Eigen::MatrixXd mw, vw;
        Eigen::RowVectorXd mb, vb;
    };
    std::vector<Layer> layers_;
    std::mt19937_64 rng_;
    std::size_t steps_ = 0;
};

/// Resolves a dataset name against the data directory; a value containing
/// '/' or ending in .csv is taken as a path.
std::filesystem::path resolve_dataset(const std::string& name, const std::filesystem::path& data_dir);

// --- trainer process side ----------------------------------------------------

/// Emits one epoch_end event per epoch from `epoch_fn` until it reaches
/// max_epochs or a stop command arrives on `stdin_fd`, then the final event.
/// Returns the process exit code.
int run_trainer_loop(const std::function<std::pair<double, double>(std::size_t)>& epoch_fn, const TrainerArgs& args,
                     std::ostream& out, int stdin_fd);

}  // namespace ecotrain

#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "ecotrain/error.hpp"
#include "ecotrain/protocol.hpp"
#include "ecotrain/trainers.hpp"

#ifndef ECOTRAIN_DATA_DIR
#define ECOTRAIN_DATA_DIR "data"
#endif

using namespace ecotrain;

int main(int argc, char** argv) {
    CLI::App app{"Reference trainers speaking the ecotrain line protocol"};
    std::string kind;
    TrainerArgs args;
    long long delay_ms = 0;
    std::string data_dir;
    app.add_option("trainer", kind, "surrogate or tinynet")->required()->check(CLI::IsMember({"surrogate", "tinynet"}));
    app.add_option("--size", args.size, "width multiplier")->required()->check(CLI::PositiveNumber);
    app.add_option("--task", args.task, "task specification")->required();
    app.add_option("--seed", args.seed, "random seed")->required();
    app.add_option("--max-epochs", args.max_epochs, "stop on its own after this many epochs")
        ->check(CLI::PositiveNumber);
    app.add_option("--epoch-ms", delay_ms, "sleep per epoch (surrogate pacing)")->check(CLI::NonNegativeNumber);
    app.add_option("--data-dir", data_dir, "directory holding bundled datasets");
    CLI11_PARSE(app, argc, argv);

    args.epoch_delay = std::chrono::milliseconds(delay_ms);
    if (data_dir.empty()) {
        const char* env = std::getenv("ECOTRAIN_DATA_DIR");
        data_dir = env && *env ? env : ECOTRAIN_DATA_DIR;
    }
    args.data_dir = data_dir;

    try {
        if (kind == "surrogate") {
            Surrogate s(SurrogateParams::from_task(args.task), args.size, args.seed);
            return run_trainer_loop([&](std::size_t e) { return s.epoch(e); }, args, std::cout, STDIN_FILENO);
        }
        auto [name, options] = parse_task_spec(args.task);
        const auto opts = TinyNetOptions::from_task_options(options);
        const Dataset all = load_dataset(resolve_dataset(name, args.data_dir));
        const auto [train, eval] = split_dataset(all, opts.train_fraction);
        TinyNet net(static_cast<int>(all.x.cols()), TinyNet::scaled_widths(opts.base_hidden, args.size), all.classes,
                    static_cast<std::uint64_t>(args.seed) * 1000003u + args.size);
        std::cout << serialize_event(TrainerEvent::log("tinynet parameters " + std::to_string(net.parameter_count())))
                  << '\n';
        return run_trainer_loop(
            [&](std::size_t) {
                net.train_epoch(train, opts.learning_rate, opts.batch_size);
                return std::pair{net.accuracy(train), net.accuracy(eval)};
            },
            args, std::cout, STDIN_FILENO);
    } catch (const Error& e) {
        std::cerr << "ecotrain-trainer: " << e.what() << '\n';
        return 2;
    }
}

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "thermalnet/dataset.hpp"
#include "thermalnet/kalman.hpp"
#include "thermalnet/metrics.hpp"
#include "thermalnet/model.hpp"
#include "thermalnet/pgm.hpp"
#include "thermalnet/rng.hpp"
#include "thermalnet/train.hpp"
#include "thermalnet/weights.hpp"

using namespace thermalnet;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <typename T>
T parse_value(const std::string& s) {
    std::istringstream in(s);
    T v{};
    in >> v;
    if (in.fail()) throw UsageError("cannot parse value '" + s + "'");
    return v;
}

template <>
std::string parse_value<std::string>(const std::string& s) {
    return s;
}

// `key = value` config files; flags given on the command line win.
class ConfigBinder {
public:
    explicit ConfigBinder(CLI::App* cmd) : cmd_(cmd) {
        cmd->add_option("--config", config_path_, "config file of key = value lines");
    }

    template <typename T>
    CLI::Option* bind(const std::string& flag, T& var, const std::string& desc) {
        CLI::Option* opt = cmd_->add_option(flag, var, desc);
        entries_[flag.substr(2)] = {opt, [&var](const std::string& s) { var = parse_value<T>(s); }};
        return opt;
    }

    void apply() const {
        if (config_path_.empty()) return;
        std::ifstream in(config_path_);
        if (!in) throw UsageError("cannot open config file " + config_path_);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw UsageError(config_path_ + ":" + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            const auto it = entries_.find(key);
            if (it == entries_.end()) {
                throw UsageError(config_path_ + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
            }
            if (it->second.first->count() > 0) continue;
            it->second.second(value);
        }
    }

private:
    CLI::App* cmd_;
    std::string config_path_;
    std::map<std::string, std::pair<CLI::Option*, std::function<void(const std::string&)>>> entries_;
};

bool parse_on_off(const std::string& s, const std::string& flag) {
    if (s == "on") return true;
    if (s == "off") return false;
    throw UsageError(flag + " must be 'on' or 'off'");
}

struct SynthSpec {
    int classes = 0;
    int per_class = 0;
    int side = 0;
};

SynthSpec parse_synth(const std::string& spec) {
    SynthSpec s;
    char extra;
    if (std::sscanf(spec.c_str(), "%dx%dx%d%c", &s.classes, &s.per_class, &s.side, &extra) != 3) {
        throw UsageError("--synth expects CLASSESxPER_CLASSxSIDE, e.g. 2x50x32");
    }
    return s;
}

void print_psnr(const char* label, double value) {
    if (std::isinf(value)) {
        std::cout << label << ": inf dB\n";
    } else {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s: %.4f dB", label, value);
        std::cout << buf << "\n";
    }
}

// ---------------------------------------------------------------------------

struct DenoiseArgs {
    std::string in_path, out_path, clean_path;
    double q = 1e-4;
    std::string r = "auto";
    double init_p = 1.0;
    int window = 3;
    bool report_psnr = false;
};

int run_denoise(const DenoiseArgs& a) {
    KalmanConfig cfg;
    cfg.q = a.q;
    cfg.init_p = a.init_p;
    cfg.window = a.window;
    if (a.r != "auto") cfg.r = parse_value<double>(a.r);
    cfg.validate();

    const Image noisy = read_pgm_file(a.in_path);
    const Image denoised = denoise_image(noisy, cfg);
    write_pgm_file(denoised, a.out_path);

    if (a.report_psnr) {
        if (a.clean_path.empty()) throw UsageError("--report-psnr requires --clean");
        const Image clean = read_pgm_file(a.clean_path);
        print_psnr("PSNR(noisy)", psnr(noisy, clean));
        print_psnr("PSNR(denoised)", psnr(denoised, clean));
    }
    return 0;
}

struct SummaryArgs {
    std::string model = "vgg19";
    size_t input_size = 128;
    size_t num_outputs = 1;
};

int run_summary(const SummaryArgs& a) {
    const Model m = build_model(a.model, a.input_size, a.num_outputs);
    std::cout << summarize(m);
    return 0;
}

struct TrainArgs {
    std::string model = "smallcnn";
    std::string train_dir, test_dir;
    std::string synth;
    double synth_noise = 0.05;
    int epochs = 10;
    int batch = 32;
    double lr = 1e-3;
    double momentum = 0.9;
    std::string optimizer = "sgd";
    uint64_t seed = 0;
    std::string denoise = "off";
    std::string freeze_base = "auto";
    std::string weights_in, weights_out, history_path;
    size_t input_size = 0;  // 0 = auto
    size_t num_outputs = 0; // 0 = number of classes
};

size_t default_input_size(const std::string& model) { return model == "smallcnn" ? 32 : 128; }

void load_train_test(const TrainArgs& a, LabeledDataset& train_set, LabeledDataset& test_set,
                     size_t& input_size) {
    if (!a.synth.empty()) {
        const SynthSpec s = parse_synth(a.synth);
        input_size = a.input_size ? a.input_size : static_cast<size_t>(s.side);
        if (input_size != static_cast<size_t>(s.side)) {
            throw UsageError("--input-size conflicts with the --synth side");
        }
        const int test_per_class = std::max(1, s.per_class / 5);
        train_set = synth_thermal(s.classes, s.per_class, s.side, a.synth_noise, derive_seed(a.seed, 100));
        test_set = synth_thermal(s.classes, test_per_class, s.side, a.synth_noise, derive_seed(a.seed, 200));
        return;
    }
    if (a.train_dir.empty() || a.test_dir.empty()) {
        throw UsageError("either --synth or both --train-dir and --test-dir are required");
    }
    input_size = a.input_size ? a.input_size : default_input_size(a.model);
    train_set = load_image_folder(a.train_dir, static_cast<int>(input_size));
    test_set = load_image_folder(a.test_dir, static_cast<int>(input_size));
}

int run_train(const TrainArgs& a) {
    LabeledDataset train_set, test_set;
    size_t input_size = 0;
    load_train_test(a, train_set, test_set, input_size);

    const size_t num_outputs = a.num_outputs ? a.num_outputs : train_set.num_classes();
    Model model = build_model(a.model, input_size, num_outputs);

    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.seed = a.seed;
    cfg.denoise = parse_on_off(a.denoise, "--denoise");
    if (a.optimizer == "sgd") {
        cfg.optimizer = Optimizer::kSgd;
    } else if (a.optimizer == "adam") {
        cfg.optimizer = Optimizer::kAdam;
    } else {
        throw UsageError("--optimizer must be 'sgd' or 'adam'");
    }

    if (!a.weights_in.empty()) {
        model.initialize(derive_seed(cfg.seed, 0));
        const LoadReport report = load_weights(model, a.weights_in);
        std::cerr << "loaded " << report.loaded.size() << " tensors from " << a.weights_in << "\n";
        if (!report.left_at_init.empty()) {
            std::cerr << "left at fresh initialization:";
            for (const auto& n : report.left_at_init) std::cerr << " " << n;
            std::cerr << "\n";
        }
        cfg.freeze_base = a.freeze_base == "auto" ? true : parse_on_off(a.freeze_base, "--freeze-base");
    } else {
        cfg.freeze_base = a.freeze_base == "auto" ? false : parse_on_off(a.freeze_base, "--freeze-base");
    }

    const TrainHistory history = train(model, train_set, test_set, cfg);
    if (!a.history_path.empty()) write_history_csv(history, a.history_path);
    if (!a.weights_out.empty()) save_weights(model, a.weights_out);

    const EpochStats& last = history.epochs.back();
    char line[200];
    std::snprintf(line, sizeof(line),
                  "final epoch: train_loss=%.6f train_acc=%.6f test_loss=%.6f test_acc=%.6f", last.train_loss,
                  last.train_accuracy, last.test_loss, last.test_accuracy);
    std::cout << line << "\n\n";
    std::cout << format_metrics(evaluate(model, test_set, train_set.class_names));
    return 0;
}

struct EvaluateArgs {
    std::string model = "smallcnn";
    std::string weights;
    std::string test_dir;
    std::string synth;
    double synth_noise = 0.05;
    uint64_t seed = 0;
    std::string json_path;
    std::string train_classes;
    size_t input_size = 0;
    size_t num_outputs = 0;
};

int run_evaluate(const EvaluateArgs& a) {
    LabeledDataset test_set;
    size_t input_size = a.input_size;
    if (!a.synth.empty()) {
        const SynthSpec s = parse_synth(a.synth);
        if (!input_size) input_size = static_cast<size_t>(s.side);
        const int test_per_class = std::max(1, s.per_class / 5);
        test_set = synth_thermal(s.classes, test_per_class, s.side, a.synth_noise, derive_seed(a.seed, 200));
    } else {
        if (a.test_dir.empty()) throw UsageError("either --synth or --test-dir is required");
        if (!input_size) input_size = default_input_size(a.model);
        test_set = load_image_folder(a.test_dir, static_cast<int>(input_size));
    }

    std::vector<std::string> train_class_names;
    if (!a.train_classes.empty()) {
        std::ifstream in(a.train_classes);
        if (!in) throw UsageError("cannot open --train-classes file " + a.train_classes);
        std::string line;
        while (std::getline(in, line)) {
            line = trim(line);
            if (!line.empty()) train_class_names.push_back(line);
        }
    }

    const size_t num_outputs = a.num_outputs          ? a.num_outputs
                               : !train_class_names.empty() ? train_class_names.size()
                                                            : test_set.num_classes();
    Model model = build_model(a.model, input_size, num_outputs);
    load_weights(model, a.weights);

    const MetricsReport report = evaluate(model, test_set, train_class_names);
    std::cout << format_metrics(report);
    if (!a.json_path.empty()) {
        std::ofstream out(a.json_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + a.json_path);
        out << metrics_to_json(report) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"thermalnet: Kalman denoising, CNN builders and desk-scale training for thermal imagery"};
    app.require_subcommand(1);

    DenoiseArgs denoise_args;
    CLI::App* denoise_cmd = app.add_subcommand("denoise", "denoise a PGM image with the per-pixel Kalman filter");
    ConfigBinder denoise_cfg(denoise_cmd);
    denoise_cfg.bind("--in", denoise_args.in_path, "input PGM")->required();
    denoise_cfg.bind("--out", denoise_args.out_path, "output PGM")->required();
    denoise_cfg.bind("--q", denoise_args.q, "process-noise variance");
    denoise_cfg.bind("--r", denoise_args.r, "measurement-noise variance or 'auto'");
    denoise_cfg.bind("--init-p", denoise_args.init_p, "initial estimate variance");
    denoise_cfg.bind("--window", denoise_args.window, "odd neighborhood side length");
    denoise_cfg.bind("--clean", denoise_args.clean_path, "clean reference PGM for PSNR");
    denoise_cmd->add_flag("--report-psnr", denoise_args.report_psnr, "print PSNR before/after (needs --clean)");

    SummaryArgs summary_args;
    CLI::App* summary_cmd = app.add_subcommand("summary", "print a model's layer table and parameter counts");
    ConfigBinder summary_cfg(summary_cmd);
    summary_cfg.bind("--model", summary_args.model, "vgg19, resnet50 or smallcnn");
    summary_cfg.bind("--input-size", summary_args.input_size, "square input size");
    summary_cfg.bind("--num-outputs", summary_args.num_outputs, "output units of the final dense layer");

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model and report metrics");
    ConfigBinder train_cfg(train_cmd);
    train_cfg.bind("--model", train_args.model, "vgg19, resnet50 or smallcnn");
    train_cfg.bind("--train-dir", train_args.train_dir, "directory-per-class training images");
    train_cfg.bind("--test-dir", train_args.test_dir, "directory-per-class test images");
    train_cfg.bind("--synth", train_args.synth, "synthetic dataset CxNxS (classes x per-class x side)");
    train_cfg.bind("--synth-noise", train_args.synth_noise, "synthetic noise standard deviation");
    train_cfg.bind("--epochs", train_args.epochs, "training epochs");
    train_cfg.bind("--batch", train_args.batch, "mini-batch size");
    train_cfg.bind("--lr", train_args.lr, "learning rate");
    train_cfg.bind("--momentum", train_args.momentum, "SGD momentum");
    train_cfg.bind("--optimizer", train_args.optimizer, "sgd or adam");
    train_cfg.bind("--seed", train_args.seed, "seed for all randomness");
    train_cfg.bind("--denoise", train_args.denoise, "on|off: Kalman-denoise images at ingestion");
    train_cfg.bind("--freeze-base", train_args.freeze_base, "on|off (default: on when --weights is given)");
    train_cfg.bind("--weights", train_args.weights_in, "initial weights file");
    train_cfg.bind("--save", train_args.weights_out, "write final weights here");
    train_cfg.bind("--history", train_args.history_path, "write per-epoch CSV here");
    train_cfg.bind("--input-size", train_args.input_size, "square input size (default: model/synth specific)");
    train_cfg.bind("--num-outputs", train_args.num_outputs, "head units (default: number of classes)");

    EvaluateArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate saved weights on a test set");
    ConfigBinder eval_cfg(eval_cmd);
    eval_cfg.bind("--model", eval_args.model, "vgg19, resnet50 or smallcnn");
    eval_cfg.bind("--weights", eval_args.weights, "weights file")->required();
    eval_cfg.bind("--test-dir", eval_args.test_dir, "directory-per-class test images");
    eval_cfg.bind("--synth", eval_args.synth, "synthetic dataset CxNxS (evaluates its held-out split)");
    eval_cfg.bind("--synth-noise", eval_args.synth_noise, "synthetic noise standard deviation");
    eval_cfg.bind("--seed", eval_args.seed, "seed matching the training run's --seed");
    eval_cfg.bind("--json", eval_args.json_path, "also write the report as JSON here");
    eval_cfg.bind("--train-classes", eval_args.train_classes, "file of training class names, one per line");
    eval_cfg.bind("--input-size", eval_args.input_size, "square input size");
    eval_cfg.bind("--num-outputs", eval_args.num_outputs, "head units of the trained model");

    try {
        app.parse(argc, argv);
        if (denoise_cmd->parsed()) {
            denoise_cfg.apply();
            return run_denoise(denoise_args);
        }
        if (summary_cmd->parsed()) {
            summary_cfg.apply();
            return run_summary(summary_args);
        }
        if (train_cmd->parsed()) {
            train_cfg.apply();
            return run_train(train_args);
        }
        if (eval_cmd->parsed()) {
            eval_cfg.apply();
            return run_evaluate(eval_args);
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const TrainingDiverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

// Command-line front end: spectrogram extraction, training, evaluation,
// attention heatmaps, gradient checks, and synthetic corpus generation.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "afcn/afcn.hpp"

namespace {

afcn::RunConfig load_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
    afcn::RunConfig rc;
    if (!config_path.empty()) rc = afcn::parse_run_config(config_path);
    if (seed) rc.seed = *seed;
    return rc;
}

std::optional<std::size_t> parse_fold(const std::string& fold) {
    if (fold == "all") return std::nullopt;
    return static_cast<std::size_t>(std::stoul(fold));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention-pooled fully convolutional emotion classifier"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "key=value run configuration file")
        ->envname("AFCN_CONFIG");
    app.add_option("--seed", seed, "override the config seed");

    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    std::string synth_out = "corpus";
    synth->add_option("--out", synth_out, "output directory");

    auto* extract = app.add_subcommand("extract", "cache spectrograms for a manifest");

    auto* train = app.add_subcommand("train", "train one cross-validation fold");
    std::string train_fold = "0";
    std::string train_out = "runs";
    train->add_option("--fold", train_fold, "fold index");
    train->add_option("--out", train_out, "output directory");

    auto* eval = app.add_subcommand("eval", "evaluate checkpoints, write metrics CSV");
    std::string eval_ckpt;
    std::string eval_fold = "all";
    std::string eval_split = "test";
    std::string eval_out = "runs";
    eval->add_option("--checkpoint", eval_ckpt,
                     "checkpoint file (single fold) or directory of fold<k>.afcn (--fold all)")
        ->required();
    eval->add_option("--fold", eval_fold, "fold index, or 'all'");
    eval->add_option("--split", eval_split, "train|val|test");
    eval->add_option("--out", eval_out, "output directory");

    auto* attend = app.add_subcommand("attend", "export attention heatmaps for one wav");
    std::string attend_ckpt;
    std::string attend_wav;
    std::string attend_out = "attn";
    attend->add_option("--checkpoint", attend_ckpt, "checkpoint file")->required();
    attend->add_option("wav", attend_wav, "input wav file")->required();
    attend->add_option("--out", attend_out, "output path prefix");

    auto* gradcheck = app.add_subcommand("gradcheck", "verify analytic gradients numerically");
    std::string corrupt;
    std::string only;
    gradcheck->add_option("--corrupt", corrupt, "perturb the named check's analytic gradient");
    gradcheck->add_option("--only", only, "run only checks whose name starts with this prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        afcn::RunConfig rc = load_config(config_path, seed);
        if (synth->parsed()) return afcn::cmd_synth(rc, synth_out);
        if (extract->parsed()) return afcn::cmd_extract(rc);
        if (train->parsed()) {
            auto fold = parse_fold(train_fold);
            if (!fold) throw afcn::ArgumentError("train needs a single fold index");
            return afcn::cmd_train(rc, *fold, train_out);
        }
        if (eval->parsed()) {
            return afcn::cmd_eval(rc, eval_ckpt, parse_fold(eval_fold), eval_split, eval_out);
        }
        if (attend->parsed()) return afcn::cmd_attend(rc, attend_ckpt, attend_wav, attend_out);
        if (gradcheck->parsed()) return afcn::cmd_gradcheck(corrupt, only);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no command\n";
    return 2;
}

#include "seqcap/cli.hpp"

#include "seqcap/data.hpp"
#include "seqcap/eval.hpp"
#include "seqcap/model.hpp"
#include "seqcap/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace seqcap {

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

// Losses only — no wall-clock times — so reruns with the same seed produce
// byte-identical report files.
std::string report_text(const TrainReport& report) {
    std::string out = "# epoch\ttrain_loss\tval_loss\n";
    char buf[96];
    for (size_t e = 0; e < report.epochs.size(); ++e) {
        const EpochStats& s = report.epochs[e];
        if (s.val_loss)
            std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\n", e + 1, s.train_loss,
                          *s.val_loss);
        else
            std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t-\n", e + 1, s.train_loss);
        out += buf;
    }
    return out;
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg, double& clip, bool& no_clip) {
    cmd->add_option("--seed", cfg.seed, "rng seed for init and shuffling");
    cmd->add_option("--lr", cfg.learning_rate, "learning rate (0 trains without updating)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--epochs", cfg.epochs, "training epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--clip", clip, "global-norm gradient clip threshold")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_flag("--no-clip", no_clip, "disable gradient clipping");
    cmd->add_option("--init-scale", cfg.init_scale, "uniform init half-width")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--log-every", cfg.log_every,
                    "print a progress line every N epochs (0 = silent)");
}

Vocabulary dummy_vocabulary(int size) {
    if (size < 3) throw std::invalid_argument("gradcheck: vocab size must be >= 3");
    std::vector<std::string> words = {Vocabulary::bos_word(), Vocabulary::eos_word(),
                                      Vocabulary::unk_word()};
    for (int k = 3; k < size; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "w%03d", k);
        words.push_back(buf);
    }
    return Vocabulary::from_word_list(std::move(words));
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"train and evaluate a mean-pooled-feature LSTM caption generator"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate a synthetic captioned corpus");
    struct {
        int items = 0;
        uint64_t seed = 1;
        int visual_dim = 32;
        double noise = 0.0;
        std::string domain = "video";
        int captions_per_item = 3;
        std::string out_features, out_captions, out_lexicon;
    } sy;
    synth->add_option("--items", sy.items, "number of items")
        ->required()
        ->check(CLI::PositiveNumber);
    synth->add_option("--seed", sy.seed, "rng seed");
    synth->add_option("--visual-dim", sy.visual_dim, "feature dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--noise", sy.noise, "feature noise sigma")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth->add_option("--domain", sy.domain, "corpus flavor")
        ->check(CLI::IsMember({"image", "video"}))
        ->capture_default_str();
    synth->add_option("--captions-per-item", sy.captions_per_item, "references per item")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--out-features", sy.out_features, "features output path")->required();
    synth->add_option("--out-captions", sy.out_captions, "captions output path")->required();
    synth->add_option("--out-lexicon", sy.out_lexicon,
                      "also write the POS lexicon covering this corpus");
    synth->callback([&] {
        SyntheticSpec spec = sy.domain == "video" ? SyntheticSpec::video_default()
                                                  : SyntheticSpec::image_default();
        spec.visual_dim = sy.visual_dim;
        spec.noise_sigma = sy.noise;
        spec.captions_per_item = sy.captions_per_item;
        SeededRng rng(sy.seed);
        Dataset d = synth_generate(spec, rng, sy.items);
        save_dataset(d, sy.out_features, sy.out_captions);
        if (!sy.out_lexicon.empty()) save_lexicon(lexicon_for(spec), sy.out_lexicon);
        std::printf("wrote %d items to %s / %s\n", sy.items, sy.out_features.c_str(),
                    sy.out_captions.c_str());
    });

    // --- train ---
    auto* tr_cmd = app.add_subcommand("train", "train a model from scratch");
    struct {
        std::string features, captions, out_ckpt, report;
        TrainConfig cfg;
        double clip = 5.0;
        bool no_clip = false;
        bool no_bias = false;
    } tr;
    tr_cmd->add_option("--features", tr.features, "features file")->required();
    tr_cmd->add_option("--captions", tr.captions, "captions file")->required();
    tr_cmd->add_option("--hidden", tr.cfg.hidden_dim, "LSTM hidden size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    tr_cmd->add_flag("--no-bias", tr.no_bias, "disable the additive gate biases");
    add_train_flags(tr_cmd, tr.cfg, tr.clip, tr.no_clip);
    tr_cmd->add_option("--out-ckpt", tr.out_ckpt, "checkpoint output path")->required();
    tr_cmd->add_option("--report", tr.report, "per-epoch loss table output path");
    tr_cmd->callback([&] {
        Dataset d = load_dataset(tr.features, tr.captions);
        tr.cfg.biases = !tr.no_bias;
        tr.cfg.grad_clip = tr.no_clip ? std::nullopt : std::optional<double>(tr.clip);
        auto [ckpt, report] = train(d, tr.cfg);
        save_checkpoint(ckpt, tr.out_ckpt);
        if (!tr.report.empty()) write_text(tr.report, report_text(report));
        std::printf("trained %d epochs, final train loss %.6f, checkpoint %s\n",
                    ckpt.epochs_completed, ckpt.final_loss, tr.out_ckpt.c_str());
    });

    // --- finetune ---
    auto* ft_cmd = app.add_subcommand("finetune", "continue from a checkpoint on a new corpus");
    struct {
        std::string base_ckpt, features, captions, out_ckpt, report;
        TrainConfig cfg;
        double clip = 5.0;
        bool no_clip = false;
    } ft;
    ft_cmd->add_option("--base-ckpt", ft.base_ckpt, "pretrained checkpoint")->required();
    ft_cmd->add_option("--features", ft.features, "target features file")->required();
    ft_cmd->add_option("--captions", ft.captions, "target captions file")->required();
    ft_cmd->add_option("--lr-factor", ft.cfg.finetune_lr_factor,
                       "learning-rate reduction factor")
        ->check(CLI::Range(1e-12, 1.0))
        ->capture_default_str();
    add_train_flags(ft_cmd, ft.cfg, ft.clip, ft.no_clip);
    ft_cmd->add_option("--out-ckpt", ft.out_ckpt, "checkpoint output path")->required();
    ft_cmd->add_option("--report", ft.report, "per-epoch loss table output path");
    ft_cmd->callback([&] {
        Checkpoint base = load_checkpoint(ft.base_ckpt);
        Dataset d = load_dataset(ft.features, ft.captions);
        ft.cfg.grad_clip = ft.no_clip ? std::nullopt : std::optional<double>(ft.clip);
        auto [ckpt, report] = finetune(base, d, ft.cfg);
        save_checkpoint(ckpt, ft.out_ckpt);
        if (!ft.report.empty()) write_text(ft.report, report_text(report));
        std::printf("finetuned %d epochs, final train loss %.6f, checkpoint %s\n",
                    ckpt.epochs_completed, ckpt.final_loss, ft.out_ckpt.c_str());
    });

    // --- generate ---
    auto* gen_cmd = app.add_subcommand("generate", "decode captions for a features file");
    struct {
        std::string ckpt, features, out;
        int max_len = 30;
    } gen;
    gen_cmd->add_option("--ckpt", gen.ckpt, "model checkpoint")->required();
    gen_cmd->add_option("--features", gen.features, "features file")->required();
    gen_cmd->add_option("--max-len", gen.max_len, "maximum words per caption")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "output path (id<TAB>caption lines)")->required();
    gen_cmd->callback([&] {
        Checkpoint ckpt = load_checkpoint(gen.ckpt);
        Dataset d = load_features(gen.features);
        std::string out;
        for (const CaptionedItem& item : d.items) {
            TokenSequence decoded =
                greedy_decode(ckpt.params, mean_pool(item.frames), gen.max_len);
            out += item.id + '\t' + decode(ckpt.params.vocab, decoded) + '\n';
        }
        write_text(gen.out, out);
        std::printf("decoded %zu items to %s\n", d.items.size(), gen.out.c_str());
    });

    // --- evaluate ---
    auto* ev_cmd = app.add_subcommand("evaluate", "score a model against reference captions");
    struct {
        std::string ckpt, features, captions, lexicon, out;
        int max_len = 30;
    } ev;
    ev_cmd->add_option("--ckpt", ev.ckpt, "model checkpoint")->required();
    ev_cmd->add_option("--features", ev.features, "features file")->required();
    ev_cmd->add_option("--captions", ev.captions, "reference captions file")->required();
    ev_cmd->add_option("--lexicon", ev.lexicon, "POS lexicon for SVO extraction")->required();
    ev_cmd->add_option("--max-len", ev.max_len, "maximum words per caption")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ev_cmd->add_option("--out", ev.out, "report output path")->required();
    ev_cmd->callback([&] {
        Checkpoint ckpt = load_checkpoint(ev.ckpt);
        Dataset d = load_dataset(ev.features, ev.captions);
        d.tag_all(Split::test);
        PosLexicon lex = load_lexicon(ev.lexicon);
        EvalReport report = evaluate(ckpt.params, d, Split::test, lex, ev.max_len);
        std::string text = serialize(report);
        write_text(ev.out, text);
        std::fputs(text.c_str(), stdout);
    });

    // --- gradcheck ---
    auto* gc_cmd = app.add_subcommand(
        "gradcheck", "compare analytic gradients against finite differences");
    gc_cmd->set_help_flag("--help", "print help");  // frees -h for the step-size flag
    struct {
        uint64_t seed = 7;
        int visual_dim = 8;
        int hidden = 12;
        int vocab = 15;
        int len = 5;
        double h = 1e-5;
        double tol = 1e-4;
        bool no_bias = false;
    } gc;
    gc_cmd->add_option("--seed", gc.seed, "rng seed")->capture_default_str();
    gc_cmd->add_option("--visual-dim", gc.visual_dim, "feature dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gc_cmd->add_option("--hidden", gc.hidden, "LSTM hidden size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gc_cmd->add_option("--vocab", gc.vocab, "vocabulary size (>= 3)")
        ->check(CLI::Range(3, 1 << 20))
        ->capture_default_str();
    gc_cmd->add_option("--len", gc.len, "sequence length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gc_cmd->add_option("--h", gc.h, "finite-difference step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gc_cmd->add_option("--tol", gc.tol, "max allowed relative error")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gc_cmd->add_flag("--no-bias", gc.no_bias, "disable the additive gate biases");
    gc_cmd->callback([&] {
        double err = gradient_check(gc.seed, gc.visual_dim, gc.hidden,
                                    dummy_vocabulary(gc.vocab), gc.len, gc.h, !gc.no_bias);
        std::printf("max relative error: %.3e (tolerance %.3e)\n", err, gc.tol);
        if (!(err < gc.tol)) throw std::runtime_error("gradient check failed");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

}  // namespace seqcap

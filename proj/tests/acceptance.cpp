// Acceptance gate: every release-blocking property, one pass/fail line each.
// Usage: acceptance <path-to-cli-binary>
//
// Tolerances, seeds and sizes are pinned here on purpose — they are the
// contract, not tunables.

#include "seqcap/data.hpp"
#include "seqcap/eval.hpp"
#include "seqcap/model.hpp"
#include "seqcap/training.hpp"

#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

using namespace seqcap;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

bool same_bits(double a, double b) {
    std::uint64_t ua, ub;
    std::memcpy(&ua, &a, sizeof ua);
    std::memcpy(&ub, &b, sizeof ub);
    return ua == ub;
}

bool same_bits(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    for (size_t k = 0; k < a.data.size(); ++k)
        if (!same_bits(a.data[k], b.data[k])) return false;
    return true;
}

bool same_bits(const RealVector& a, const RealVector& b) {
    if (a.size() != b.size()) return false;
    for (size_t k = 0; k < a.size(); ++k)
        if (!same_bits(a[k], b[k])) return false;
    return true;
}

Vocabulary numbered_vocab(int size) {
    std::vector<std::string> words = {Vocabulary::bos_word(), Vocabulary::eos_word(),
                                      Vocabulary::unk_word()};
    for (int k = 3; k < size; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "w%03d", k);
        words.push_back(buf);
    }
    return Vocabulary::from_word_list(std::move(words));
}

// ---------------------------------------------------------------- criterion 1
// Analytic BPTT gradients match central finite differences on an end-to-end
// sequence loss: visual 8, hidden 12, vocab 15, length 5, h = 1e-5, three
// seeds, max relative error < 1e-4, under 60 s.
Outcome gradient_correctness() {
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::uint64_t seed : {1ull, 7ull, 42ull})
        worst = std::max(worst,
                         gradient_check(seed, 8, 12, numbered_vocab(15), 5, 1e-5, true));
    double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 60.0,
            fmt("max rel err %.3e over seeds {1,7,42} (tol 1e-4), %.1f s (limit 60)",
                worst, secs)};
}

// ---------------------------------------------------------------- criterion 2
// All-zero parameters spread probability uniformly, so the loss of any
// N-token target over a |D|-word vocabulary is N*ln|D|, within 1e-9, for
// randomized N and |D|.
Outcome uniform_model_loss() {
    SeededRng rng(2026);
    double worst = 0.0;
    for (int trial = 0; trial < 12; ++trial) {
        int vocab_n = 4 + static_cast<int>(rng.next_below(47));
        int visual_dim = 2 + static_cast<int>(rng.next_below(9));
        int hidden = 3 + static_cast<int>(rng.next_below(14));
        Vocabulary vocab = numbered_vocab(vocab_n);
        ModelParams p = init_model(rng, vocab, visual_dim, hidden, 0.0, true);

        TokenSequence seq;
        int content = static_cast<int>(rng.next_below(11));
        for (int k = 0; k < content; ++k)
            seq.push_back(3 + static_cast<int>(rng.next_below(vocab_n - 3)));
        seq.push_back(Vocabulary::kEos);

        RealVector feat(visual_dim);
        for (double& x : feat) x = rng.uniform(-2.0, 2.0);

        double loss = sequence_forward(p, feat, seq).loss;
        double expected = static_cast<double>(seq.size()) * std::log(vocab_n);
        worst = std::max(worst, std::fabs(loss - expected));
    }
    return {worst < 1e-9, fmt("max |loss - N*ln(D)| = %.3e over 12 random (N, D) (tol 1e-9)",
                              worst)};
}

// ---------------------------------------------------------------- criterion 3
// The model memorizes a tiny noiseless corpus: 10 items, 2 captions each,
// <= 500 epochs; final mean per-word loss < 0.1 nats, greedy decode equals a
// training reference for >= 9/10 items, corpus BLEU-4 >= 0.90, under 5 min.
Outcome overfit_reproduction() {
    auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec sp = SyntheticSpec::video_default();
    sp.visual_dim = 12;
    sp.noise_sigma = 0.0;
    sp.captions_per_item = 2;
    SeededRng rng(31);
    Dataset d = synth_generate(sp, rng, 10);

    TrainConfig cfg;
    cfg.learning_rate = 0.3;
    cfg.epochs = 350;
    cfg.seed = 5;
    cfg.hidden_dim = 24;
    auto [ckpt, report] = train(d, cfg);
    const ModelParams& p = ckpt.params;

    double total_loss = 0.0;
    size_t total_words = 0;
    int matched = 0;
    std::vector<Tokens> hyps;
    std::vector<std::vector<Tokens>> refs;
    for (const CaptionedItem& item : d.items) {
        RealVector feat = mean_pool(item.frames);
        for (const std::string& caption : item.captions) {
            TokenSequence seq = encode(p.vocab, caption);
            total_loss += sequence_forward(p, feat, seq).loss;
            total_words += seq.size();
        }
        std::string decoded = decode(p.vocab, greedy_decode(p, feat));
        bool hit = std::find(item.captions.begin(), item.captions.end(), decoded) !=
                   item.captions.end();
        matched += hit ? 1 : 0;
        hyps.push_back(tokenize(decoded));
        std::vector<Tokens> item_refs;
        for (const std::string& caption : item.captions) item_refs.push_back(tokenize(caption));
        refs.push_back(std::move(item_refs));
    }
    double mean_loss = total_loss / static_cast<double>(total_words);
    double bleu = bleu4(hyps, refs);
    double secs = seconds_since(t0);
    bool pass = mean_loss < 0.1 && matched >= 9 && bleu >= 0.90 && cfg.epochs <= 500 &&
                secs < 300.0;
    return {pass, fmt("%d epochs: %.4f nats/word (<0.1), %d/10 exact decodes (>=9), "
                      "BLEU %.4f (>=0.90), %.1f s (limit 300)",
                      cfg.epochs, mean_loss, matched, bleu, secs)};
}

// ---------------------------------------------------------------- criterion 4
// Hand-computed BLEU oracles: identity == 1.0 exactly; the 4/5-gram overlap
// pair equals 0.2^(1/4); the clipping pair equals 0. Tolerance 1e-9.
Outcome bleu_oracles() {
    auto words = [](const char* s) { return tokenize(s); };

    double identity = bleu4({words("a cat sits"), words("the dog runs far away")},
                            {{words("a cat sits"), words("something else entirely")},
                             {words("the dog runs far away")}});
    double overlap = bleu4({words("a b c d e")}, {{words("a b c d f")}});
    double clipped = bleu4({words("a a a")}, {{words("a b")}});

    bool pass = identity == 1.0 &&
                std::fabs(overlap - std::pow(0.2, 0.25)) < 1e-9 &&
                std::fabs(clipped - 0.0) < 1e-9;
    return {pass, fmt("identity %.17g (== 1), overlap %.12f (0.2^0.25), clipped %.1e (0)",
                      identity, overlap, clipped)};
}

// ---------------------------------------------------------------- criterion 5
// SVO metric logic: any_valid >= most_frequent componentwise on randomized
// reports, and the rule-based extractor recovers the latent triple of every
// noiseless verb-bearing synthetic caption.
Outcome svo_metric_logic() {
    SeededRng rng(404);
    const std::vector<std::string> pool = {"cat", "dog", "man", "ball", "run", "eat"};
    auto random_triple = [&] {
        SvoTriple t;
        if (rng.next_below(4) != 0) t.subject = pool[rng.next_below(pool.size())];
        if (rng.next_below(4) != 0) t.verb = pool[rng.next_below(pool.size())];
        if (rng.next_below(4) != 0) t.object = pool[rng.next_below(pool.size())];
        return t;
    };
    int dominance_violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = 1 + rng.next_below(8);
        std::vector<SvoTriple> preds;
        std::vector<std::vector<SvoTriple>> refs;
        for (size_t i = 0; i < n; ++i) {
            preds.push_back(random_triple());
            std::vector<SvoTriple> item_refs;
            size_t m = 1 + rng.next_below(4);
            for (size_t j = 0; j < m; ++j) item_refs.push_back(random_triple());
            refs.push_back(std::move(item_refs));
        }
        auto any = svo_accuracy_any_valid(preds, refs);
        auto freq = svo_accuracy_most_frequent(preds, refs);
        for (int k = 0; k < 3; ++k)
            if (any[k] + 1e-12 < freq[k]) ++dominance_violations;
    }

    SyntheticSpec sp = SyntheticSpec::video_default();
    sp.visual_dim = 4;
    SeededRng synth_rng(77);
    Dataset d = synth_generate(sp, synth_rng, 60);
    PosLexicon lex = lexicon_for(sp);
    int captions = 0;
    int recovered = 0;
    for (const CaptionedItem& item : d.items)
        for (const std::string& caption : item.captions) {
            ++captions;
            SvoTriple t = extract_svo(tokenize(caption), lex);
            const auto& truth = *item.latent_svo;
            if (t.subject == truth[0] && t.verb == truth[1] && t.object == truth[2])
                ++recovered;
        }

    bool pass = dominance_violations == 0 && recovered == captions;
    return {pass, fmt("any_valid >= most_frequent violations: %d of 600 slot checks; "
                      "latent triples recovered %d/%d",
                      dominance_violations, recovered, captions)};
}

// ---------------------------------------------------------------- criterion 6
// Transfer mechanics: after initializing from an image-domain checkpoint,
// shared words keep their output-projection rows and input-weight columns
// bit-for-bit under the index remap, and the fine-tune step size is
// base learning rate x factor.
Outcome transfer_mechanics() {
    SyntheticSpec im = SyntheticSpec::image_default();
    im.visual_dim = 6;
    SeededRng img_rng(3);
    Dataset img = synth_generate(im, img_rng, 30);
    TrainConfig bcfg;
    bcfg.learning_rate = 0.2;
    bcfg.epochs = 3;
    bcfg.seed = 8;
    bcfg.hidden_dim = 10;
    auto [base, base_report] = train(img, bcfg);

    SyntheticSpec vid = SyntheticSpec::video_default();
    vid.visual_dim = 6;
    SeededRng vid_rng(4);
    Dataset target = synth_generate(vid, vid_rng, 20);

    Vocabulary merged =
        merge_vocabularies(base.params.vocab, build_vocabulary(target.all_captions()));
    SeededRng init_rng(9);
    ModelParams init = transfer_init(base.params, merged, init_rng, 0.08);

    const ModelParams& bp = base.params;
    int vd = bp.visual_dim;
    int shared = 0;
    bool rows_ok = true, cols_ok = true;
    for (int bi = 0; bi < bp.vocab.size(); ++bi) {
        const std::string& w = bp.vocab.word_at(bi);
        int mi = merged.index_of(w);
        ++shared;
        for (int h = 0; h < bp.layer2.hidden_dim; ++h)
            rows_ok &= same_bits(init.output_proj.at(mi, h), bp.output_proj.at(bi, h));
        const Matrix* base_wx[4] = {&bp.layer1.w_xi, &bp.layer1.w_xf, &bp.layer1.w_xo,
                                    &bp.layer1.w_xc};
        const Matrix* init_wx[4] = {&init.layer1.w_xi, &init.layer1.w_xf, &init.layer1.w_xo,
                                    &init.layer1.w_xc};
        for (int m = 0; m < 4; ++m)
            for (int r = 0; r < base_wx[m]->rows; ++r)
                cols_ok &= same_bits(init_wx[m]->at(r, vd + mi), base_wx[m]->at(r, vd + bi));
    }
    bool visual_ok = true;
    {
        const Matrix* base_wx[4] = {&bp.layer1.w_xi, &bp.layer1.w_xf, &bp.layer1.w_xo,
                                    &bp.layer1.w_xc};
        const Matrix* init_wx[4] = {&init.layer1.w_xi, &init.layer1.w_xf, &init.layer1.w_xo,
                                    &init.layer1.w_xc};
        for (int m = 0; m < 4; ++m)
            for (int r = 0; r < base_wx[m]->rows; ++r)
                for (int c = 0; c < vd; ++c)
                    visual_ok &= same_bits(init_wx[m]->at(r, c), base_wx[m]->at(r, c));
    }
    bool recurrent_ok = same_bits(init.layer1.w_hi, bp.layer1.w_hi) &&
                        same_bits(init.layer1.w_hf, bp.layer1.w_hf) &&
                        same_bits(init.layer1.w_ho, bp.layer1.w_ho) &&
                        same_bits(init.layer1.w_hc, bp.layer1.w_hc) &&
                        init.layer2 == bp.layer2;

    TrainConfig fcfg;
    fcfg.learning_rate = 0.4;
    fcfg.finetune_lr_factor = 0.25;
    fcfg.epochs = 1;
    fcfg.seed = 9;
    fcfg.hidden_dim = 10;
    auto [ft, ft_report] = finetune(base, target, fcfg);
    double effective = std::stod(ft.config_echo.at("effective_learning_rate"));
    bool lr_ok = effective == 0.4 * 0.25;

    bool pass = rows_ok && cols_ok && visual_ok && recurrent_ok && lr_ok;
    return {pass, fmt("%d shared words bit-identical (rows %s, word cols %s, visual cols %s, "
                      "recurrent %s); effective lr %.17g == 0.4*0.25 %s",
                      shared, rows_ok ? "yes" : "NO", cols_ok ? "yes" : "NO",
                      visual_ok ? "yes" : "NO", recurrent_ok ? "yes" : "NO", effective,
                      lr_ok ? "yes" : "NO")};
}

// ---------------------------------------------------------------- criterion 7
// Transfer benefit: against a 200-item image-domain pretraining corpus and a
// 40-item video-domain target, the fine-tuned model does at least as well as
// from-scratch training with the same target epoch budget — validation loss
// <= and test BLEU-4 >=. Under 10 min.
Outcome transfer_benefit() {
    auto t0 = std::chrono::steady_clock::now();
    const int visual_dim = 16;
    const int hidden = 20;

    SyntheticSpec im = SyntheticSpec::image_default();
    im.visual_dim = visual_dim;
    im.noise_sigma = 0.2;
    SeededRng img_rng(21);
    Dataset img = synth_generate(im, img_rng, 200);

    SyntheticSpec vs = SyntheticSpec::video_default();
    vs.visual_dim = visual_dim;
    vs.noise_sigma = 0.2;
    SeededRng vid_rng(22);
    Dataset vid_all = synth_generate(vs, vid_rng, 40);
    SeededRng split_rng(23);
    Dataset vid = split(vid_all, kDefaultTrainFrac, kDefaultValFrac, kDefaultTestFrac,
                        split_rng);

    TrainConfig pre;
    pre.learning_rate = 0.2;
    pre.epochs = 25;
    pre.seed = 31;
    pre.hidden_dim = hidden;
    auto [base, pre_report] = train(img, pre);

    TrainConfig tc;
    tc.learning_rate = 0.2;
    tc.epochs = 30;
    tc.seed = 32;
    tc.hidden_dim = hidden;
    auto [scratch, scratch_report] = train(vid, tc);

    TrainConfig fc = tc;
    fc.finetune_lr_factor = 1.0;  // same step size, same epochs: only the start differs
    auto [tuned, tuned_report] = finetune(base, vid, fc);

    auto test_bleu = [&](const ModelParams& p) {
        std::vector<Tokens> hyps;
        std::vector<std::vector<Tokens>> refs;
        for (size_t idx : vid.indices(Split::test)) {
            const CaptionedItem& item = vid.items[idx];
            hyps.push_back(tokenize(decode(p.vocab, greedy_decode(p, mean_pool(item.frames)))));
            std::vector<Tokens> item_refs;
            for (const std::string& caption : item.captions)
                item_refs.push_back(tokenize(caption));
            refs.push_back(std::move(item_refs));
        }
        return bleu4(hyps, refs);
    };

    double scratch_val = scratch_report.epochs.back().val_loss.value();
    double tuned_val = tuned_report.epochs.back().val_loss.value();
    double scratch_bleu = test_bleu(scratch.params);
    double tuned_bleu = test_bleu(tuned.params);
    double secs = seconds_since(t0);

    bool pass = tuned_val <= scratch_val && tuned_bleu >= scratch_bleu && secs < 600.0;
    return {pass, fmt("val loss tuned %.4f <= scratch %.4f; test BLEU tuned %.4f >= "
                      "scratch %.4f; %.1f s (limit 600)",
                      tuned_val, scratch_val, tuned_bleu, scratch_bleu, secs)};
}

// ---------------------------------------------------------------- criterion 8
// Mean pooling is permutation-invariant bit-for-bit and the identity on a
// single frame; a 197-item corpus splits 120/10/67 at the default fractions.
Outcome pooling_and_split() {
    SeededRng rng(55);
    std::vector<RealVector> frames(6, RealVector(9));
    for (RealVector& f : frames)
        for (double& x : f) x = rng.uniform(-3.0, 3.0);
    RealVector pooled = mean_pool(frames);
    bool permutation_ok = true;
    std::vector<RealVector> shuffled = frames;
    for (int t = 0; t < 30; ++t) {
        rng.shuffle(shuffled);
        permutation_ok &= same_bits(mean_pool(shuffled), pooled);
    }
    bool identity_ok = same_bits(mean_pool({frames[0]}), frames[0]);

    SyntheticSpec sp = SyntheticSpec::video_default();
    sp.visual_dim = 3;
    SeededRng synth_rng(60);
    Dataset d = synth_generate(sp, synth_rng, 197);
    SeededRng split_rng(61);
    Dataset s = split(d, kDefaultTrainFrac, kDefaultValFrac, kDefaultTestFrac, split_rng);
    size_t n_train = s.indices(Split::train).size();
    size_t n_val = s.indices(Split::val).size();
    size_t n_test = s.indices(Split::test).size();
    bool split_ok = n_train == 120 && n_val == 10 && n_test == 67;

    bool pass = permutation_ok && identity_ok && split_ok;
    return {pass, fmt("30 permutations bit-identical: %s; single-frame identity: %s; "
                      "197 -> %zu/%zu/%zu (want 120/10/67)",
                      permutation_ok ? "yes" : "NO", identity_ok ? "yes" : "NO", n_train,
                      n_val, n_test)};
}

// ---------------------------------------------------------------- criterion 9
// Same seed -> byte-identical checkpoint files; save/load round-trips
// losslessly; and the shipped binary runs synth -> train -> evaluate clean.
Outcome determinism_and_persistence(const std::string& cli) {
    testutil::TempDir dir;

    SyntheticSpec sp = SyntheticSpec::video_default();
    sp.visual_dim = 6;
    SeededRng rng(60);
    Dataset d = synth_generate(sp, rng, 8);
    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.epochs = 5;
    cfg.seed = 9;
    cfg.hidden_dim = 8;
    auto [c1, r1] = train(d, cfg);
    auto [c2, r2] = train(d, cfg);
    save_checkpoint(c1, dir.file("a.ckpt"));
    save_checkpoint(c2, dir.file("b.ckpt"));
    bool bytes_ok = testutil::read_file(dir.file("a.ckpt")) ==
                    testutil::read_file(dir.file("b.ckpt"));
    bool roundtrip_ok = load_checkpoint(dir.file("a.ckpt")) == c1;

    auto shell = [&](const std::string& args) {
        std::string cmd = cli + ' ' + args + " > /dev/null";
        return std::system(cmd.c_str());
    };
    int rc_synth = shell("synth --items 8 --seed 2 --visual-dim 6 --out-features " +
                         dir.file("f.tsv") + " --out-captions " + dir.file("c.tsv") +
                         " --out-lexicon " + dir.file("lex.tsv"));
    int rc_train = shell("train --features " + dir.file("f.tsv") + " --captions " +
                         dir.file("c.tsv") +
                         " --epochs 5 --lr 0.2 --hidden 8 --seed 3 --out-ckpt " +
                         dir.file("m.ckpt"));
    int rc_eval = shell("evaluate --ckpt " + dir.file("m.ckpt") + " --features " +
                        dir.file("f.tsv") + " --captions " + dir.file("c.tsv") +
                        " --lexicon " + dir.file("lex.tsv") + " --out " +
                        dir.file("report.txt"));
    bool cli_ok = rc_synth == 0 && rc_train == 0 && rc_eval == 0 &&
                  !testutil::read_file(dir.file("report.txt")).empty();

    bool pass = bytes_ok && roundtrip_ok && cli_ok;
    return {pass, fmt("same-seed checkpoints byte-identical: %s; round trip lossless: %s; "
                      "cli synth/train/evaluate exit codes %d/%d/%d",
                      bytes_ok ? "yes" : "NO", roundtrip_ok ? "yes" : "NO", rc_synth,
                      rc_train, rc_eval)};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-cli-binary>\n");
        return 2;
    }
    const std::string cli = argv[1];

    struct Entry {
        const char* label;
        Outcome (*fn)();
    };
    const Entry entries[] = {
        {"gradient correctness", gradient_correctness},
        {"uniform-model loss", uniform_model_loss},
        {"overfit reproduction", overfit_reproduction},
        {"BLEU oracles", bleu_oracles},
        {"SVO metric logic", svo_metric_logic},
        {"transfer mechanics", transfer_mechanics},
        {"transfer benefit", transfer_benefit},
        {"pooling and split", pooling_and_split},
    };

    int failures = 0;
    int number = 0;
    auto report = [&](const char* label, const Outcome& o) {
        ++number;
        std::printf("%s  %d %s: %s\n", o.pass ? "PASS" : "FAIL", number, label,
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    };

    for (const Entry& e : entries) {
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        report(e.label, o);
    }
    {
        Outcome o;
        try {
            o = determinism_and_persistence(cli);
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        report("determinism and persistence", o);
    }

    std::printf("acceptance: %d/9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}

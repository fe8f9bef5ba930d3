#include "seqcap/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace seqcap {

namespace {

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_config(const TrainConfig& cfg) {
    // Zero is legal so that a zero-rate run can serve as a parameter
    // identity (useful for tests and dry runs).
    if (!(cfg.learning_rate >= 0) || !std::isfinite(cfg.learning_rate))
        throw std::invalid_argument("learning_rate must be >= 0 and finite");
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (cfg.grad_clip && !(*cfg.grad_clip > 0))
        throw std::invalid_argument("grad_clip must be > 0 when set");
    if (cfg.init_scale < 0) throw std::invalid_argument("init_scale must be >= 0");
    if (cfg.hidden_dim < 1) throw std::invalid_argument("hidden_dim must be >= 1");
    if (!(cfg.finetune_lr_factor > 0) || cfg.finetune_lr_factor > 1)
        throw std::invalid_argument("finetune_lr_factor must be in (0, 1]");
}

int dataset_visual_dim(const Dataset& d) {
    if (d.items.empty()) throw std::invalid_argument("dataset has no items");
    if (d.items[0].frames.empty())
        throw std::invalid_argument("item '" + d.items[0].id + "' has no frames");
    int dim = static_cast<int>(d.items[0].frames[0].size());
    for (const CaptionedItem& item : d.items)
        for (const RealVector& f : item.frames)
            if (static_cast<int>(f.size()) != dim)
                throw std::invalid_argument("item '" + item.id +
                                            "' frame dimension disagrees with the corpus");
    return dim;
}

std::map<std::string, std::string> config_echo(const TrainConfig& cfg, const std::string& mode,
                                               double effective_lr, int hidden_dim, bool biases) {
    std::map<std::string, std::string> echo;
    echo["mode"] = mode;
    echo["learning_rate"] = format_real(cfg.learning_rate);
    echo["effective_learning_rate"] = format_real(effective_lr);
    echo["epochs"] = std::to_string(cfg.epochs);
    echo["seed"] = std::to_string(cfg.seed);
    echo["grad_clip"] = cfg.grad_clip ? format_real(*cfg.grad_clip) : "none";
    echo["init_scale"] = format_real(cfg.init_scale);
    echo["hidden_dim"] = std::to_string(hidden_dim);
    echo["biases"] = biases ? "1" : "0";
    if (mode == "finetune") echo["finetune_lr_factor"] = format_real(cfg.finetune_lr_factor);
    return echo;
}

struct TrainPair {
    size_t item_idx;     // into Dataset::items, for diagnostics
    size_t feature_idx;  // into the pooled-feature table
    TokenSequence tokens;
};

void collect_pairs(const Dataset& d, Split which, const Vocabulary& vocab,
                   std::vector<RealVector>& features, std::vector<TrainPair>& pairs) {
    for (size_t idx : d.indices(which)) {
        const CaptionedItem& item = d.items[idx];
        features.push_back(mean_pool(item.frames));
        for (const std::string& caption : item.captions)
            pairs.push_back({idx, features.size() - 1, encode(vocab, caption)});
    }
}

std::pair<Checkpoint, TrainReport> run_training(const Dataset& d, const TrainConfig& cfg,
                                                ModelParams params, SeededRng& rng,
                                                double lr, int epochs_already,
                                                std::map<std::string, std::string> echo) {
    check_model(params);

    std::vector<RealVector> train_features, val_features;
    std::vector<TrainPair> train_pairs, val_pairs;
    collect_pairs(d, Split::train, params.vocab, train_features, train_pairs);
    collect_pairs(d, Split::val, params.vocab, val_features, val_pairs);
    if (train_pairs.empty()) throw std::invalid_argument("train: empty train split");

    std::vector<size_t> order(train_pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainReport report;
    report.epochs.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto started = std::chrono::steady_clock::now();
        rng.shuffle(order);

        double total_loss = 0.0;
        size_t total_words = 0;
        for (size_t k : order) {
            const TrainPair& pair = train_pairs[k];
            SequenceForward fwd =
                sequence_forward(params, train_features[pair.feature_idx], pair.tokens);
            if (!std::isfinite(fwd.loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epochs_already + epoch + 1) + ", item '" +
                                         d.items[pair.item_idx].id +
                                         "' (try a lower learning rate or gradient clipping)");
            ModelGrads g = sequence_backward(params, fwd, pair.tokens);
            sgd_step(params, g, lr, cfg.grad_clip);
            total_loss += fwd.loss;
            total_words += pair.tokens.size();
        }

        EpochStats stats;
        stats.train_loss = total_loss / static_cast<double>(total_words);
        if (!val_pairs.empty()) {
            double val_loss = 0.0;
            size_t val_words = 0;
            for (const TrainPair& pair : val_pairs) {
                val_loss +=
                    sequence_forward(params, val_features[pair.feature_idx], pair.tokens).loss;
                val_words += pair.tokens.size();
            }
            stats.val_loss = val_loss / static_cast<double>(val_words);
        }
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        report.epochs.push_back(stats);

        if (cfg.log_every > 0 && (epoch + 1) % cfg.log_every == 0) {
            if (stats.val_loss)
                std::fprintf(stderr, "epoch %d/%d  train %.4f  val %.4f\n", epoch + 1, cfg.epochs,
                             stats.train_loss, *stats.val_loss);
            else
                std::fprintf(stderr, "epoch %d/%d  train %.4f\n", epoch + 1, cfg.epochs,
                             stats.train_loss);
        }
    }

    Checkpoint ckpt;
    ckpt.params = std::move(params);
    ckpt.epochs_completed = epochs_already + cfg.epochs;
    ckpt.final_loss = report.epochs.back().train_loss;
    ckpt.config_echo = std::move(echo);
    return {std::move(ckpt), std::move(report)};
}

}  // namespace

void sgd_step(ModelParams& p, const ModelGrads& g, double lr, std::optional<double> clip) {
    std::vector<double*> params = param_view(p);
    std::vector<const double*> grads = grad_view(g);
    if (params.size() != grads.size())
        throw std::invalid_argument("sgd_step: gradient shape mismatch");

    double sq_norm = 0.0;
    for (const double* gp : grads) {
        if (!std::isfinite(*gp)) throw std::runtime_error("sgd_step: non-finite gradient");
        sq_norm += *gp * *gp;
    }
    double scale = 1.0;
    if (clip) {
        double norm = std::sqrt(sq_norm);
        if (norm > *clip) scale = *clip / norm;
    }
    for (size_t k = 0; k < params.size(); ++k) *params[k] -= lr * scale * *grads[k];
}

std::pair<Checkpoint, TrainReport> train(const Dataset& d, const TrainConfig& cfg) {
    check_config(cfg);
    if (d.indices(Split::train).empty()) throw std::invalid_argument("train: empty train split");
    int visual_dim = dataset_visual_dim(d);
    Vocabulary vocab = build_vocabulary(d.all_captions());
    SeededRng rng(cfg.seed);
    ModelParams params =
        init_model(rng, vocab, visual_dim, cfg.hidden_dim, cfg.init_scale, cfg.biases);
    return run_training(d, cfg, std::move(params), rng, cfg.learning_rate, 0,
                        config_echo(cfg, "fresh", cfg.learning_rate, cfg.hidden_dim, cfg.biases));
}

std::pair<Checkpoint, TrainReport> train(const Dataset& d, const TrainConfig& cfg,
                                         const Checkpoint& resume_from) {
    check_config(cfg);
    check_model(resume_from.params);
    if (dataset_visual_dim(d) != resume_from.params.visual_dim)
        throw std::invalid_argument("train: dataset visual dimension does not match checkpoint");
    SeededRng rng(cfg.seed);
    return run_training(d, cfg, resume_from.params, rng, cfg.learning_rate,
                        resume_from.epochs_completed,
                        config_echo(cfg, "resume", cfg.learning_rate,
                                    resume_from.params.hidden_dim(),
                                    resume_from.params.layer1.has_bias));
}

ModelParams transfer_init(const ModelParams& base, const Vocabulary& merged, SeededRng& rng,
                          double init_scale) {
    check_model(base);
    ModelParams p = init_model(rng, merged, base.visual_dim, base.hidden_dim(), init_scale,
                               base.layer1.has_bias);

    // Everything that does not index the vocabulary transfers wholesale.
    p.layer2 = base.layer2;
    p.layer1.w_hi = base.layer1.w_hi;
    p.layer1.w_hf = base.layer1.w_hf;
    p.layer1.w_ho = base.layer1.w_ho;
    p.layer1.w_hc = base.layer1.w_hc;
    p.layer1.b_i = base.layer1.b_i;
    p.layer1.b_f = base.layer1.b_f;
    p.layer1.b_o = base.layer1.b_o;
    p.layer1.b_c = base.layer1.b_c;

    // Layer-1 input weights: the visual block copies as-is; a word column
    // moves from the base index to the merged index when the base model
    // knows the word. Columns of genuinely new words keep the fresh init.
    const Matrix* from[] = {&base.layer1.w_xi, &base.layer1.w_xf, &base.layer1.w_xo,
                            &base.layer1.w_xc};
    Matrix* to[] = {&p.layer1.w_xi, &p.layer1.w_xf, &p.layer1.w_xo, &p.layer1.w_xc};
    int hidden = base.hidden_dim();
    for (int m = 0; m < 4; ++m) {
        for (int r = 0; r < hidden; ++r)
            for (int c = 0; c < base.visual_dim; ++c) to[m]->at(r, c) = from[m]->at(r, c);
        for (int w = 0; w < merged.size(); ++w) {
            const std::string& word = merged.word_at(w);
            if (!base.vocab.contains(word)) continue;
            int old_w = base.vocab.index_of(word);
            for (int r = 0; r < hidden; ++r)
                to[m]->at(r, base.visual_dim + w) = from[m]->at(r, base.visual_dim + old_w);
        }
    }

    for (int w = 0; w < merged.size(); ++w) {
        const std::string& word = merged.word_at(w);
        if (!base.vocab.contains(word)) continue;
        int old_w = base.vocab.index_of(word);
        for (int c = 0; c < p.output_proj.cols; ++c)
            p.output_proj.at(w, c) = base.output_proj.at(old_w, c);
    }
    return p;
}

std::pair<Checkpoint, TrainReport> finetune(const Checkpoint& base, const Dataset& d,
                                            const TrainConfig& cfg) {
    check_config(cfg);
    check_model(base.params);
    if (dataset_visual_dim(d) != base.params.visual_dim)
        throw std::invalid_argument(
            "finetune: dataset visual dimension does not match the base checkpoint");
    Vocabulary merged = merge_vocabularies(base.params.vocab, build_vocabulary(d.all_captions()));
    SeededRng rng(cfg.seed);
    ModelParams params = transfer_init(base.params, merged, rng, cfg.init_scale);
    double effective_lr = cfg.learning_rate * cfg.finetune_lr_factor;
    return run_training(d, cfg, std::move(params), rng, effective_lr, 0,
                        config_echo(cfg, "finetune", effective_lr, base.params.hidden_dim(),
                                    base.params.layer1.has_bias));
}

namespace {

const char* kMagic = "SEQCAP-CKPT v1";

struct NamedMatrix {
    const char* name;
    const Matrix* m;
};

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
    out << "MATRIX " << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (c) out << ' ';
            out << format_real(m.at(r, c));
        }
        out << '\n';
    }
}

Matrix column_matrix(const RealVector& v) {
    Matrix m(static_cast<int>(v.size()), 1);
    for (size_t k = 0; k < v.size(); ++k) m.data[k] = v[k];
    return m;
}

void write_layer(std::ostream& out, const std::string& prefix, const LstmLayerParams& l) {
    write_matrix(out, prefix + ".w_xi", l.w_xi);
    write_matrix(out, prefix + ".w_hi", l.w_hi);
    write_matrix(out, prefix + ".w_xf", l.w_xf);
    write_matrix(out, prefix + ".w_hf", l.w_hf);
    write_matrix(out, prefix + ".w_xo", l.w_xo);
    write_matrix(out, prefix + ".w_ho", l.w_ho);
    write_matrix(out, prefix + ".w_xc", l.w_xc);
    write_matrix(out, prefix + ".w_hc", l.w_hc);
    if (l.has_bias) {
        write_matrix(out, prefix + ".b_i", column_matrix(l.b_i));
        write_matrix(out, prefix + ".b_f", column_matrix(l.b_f));
        write_matrix(out, prefix + ".b_o", column_matrix(l.b_o));
        write_matrix(out, prefix + ".b_c", column_matrix(l.b_c));
    }
}

[[noreturn]] void corrupt(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": corrupt checkpoint: " + what);
}

double parse_checkpoint_real(const std::string& token, const std::string& path) {
    const char* begin = token.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') corrupt(path, "bad numeric value '" + token + "'");
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    check_model(c.params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

    out << kMagic << '\n';
    out << "META epochs_completed " << c.epochs_completed << '\n';
    out << "META final_loss " << format_real(c.final_loss) << '\n';
    out << "META visual_dim " << c.params.visual_dim << '\n';
    out << "META biases " << (c.params.layer1.has_bias ? 1 : 0) << '\n';
    for (const auto& [key, value] : c.config_echo) out << "CFG " << key << ' ' << value << '\n';

    out << "VOCAB\n";
    for (const std::string& w : c.params.vocab.words()) out << w << '\n';
    out << "END\n";

    write_layer(out, "layer1", c.params.layer1);
    write_layer(out, "layer2", c.params.layer2);
    write_matrix(out, "output_proj", c.params.output_proj);

    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    std::string line;
    if (!std::getline(in, line)) corrupt(path, "empty file");
    if (line != kMagic) {
        std::istringstream magic(line);
        std::string tag, version;
        magic >> tag >> version;
        if (tag == "SEQCAP-CKPT")
            throw std::runtime_error(path + ": unsupported checkpoint version '" + version +
                                     "' (expected v1)");
        corrupt(path, "missing magic line");
    }

    Checkpoint c;
    std::map<std::string, std::string> meta;
    std::vector<std::string> words;
    std::map<std::string, Matrix> matrices;

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "META" || kind == "CFG") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value[0] == ' ') value.erase(0, 1);
            if (key.empty() || value.empty()) corrupt(path, "malformed " + kind + " line");
            if (kind == "META")
                meta[key] = value;
            else
                c.config_echo[key] = value;
        } else if (kind == "VOCAB") {
            bool closed = false;
            while (std::getline(in, line)) {
                if (line == "END") {
                    closed = true;
                    break;
                }
                words.push_back(line);
            }
            if (!closed) corrupt(path, "unterminated vocabulary block");
        } else if (kind == "MATRIX") {
            std::string name;
            int rows = 0, cols = 0;
            if (!(ls >> name >> rows >> cols) || rows < 1 || cols < 1)
                corrupt(path, "malformed matrix header");
            if (matrices.count(name)) corrupt(path, "duplicate matrix '" + name + "'");
            Matrix m(rows, cols);
            size_t need = m.data.size(), got = 0;
            while (got < need) {
                if (!std::getline(in, line)) corrupt(path, "truncated matrix '" + name + "'");
                std::istringstream vs(line);
                std::string token;
                while (vs >> token) {
                    if (got >= need) corrupt(path, "too many values in matrix '" + name + "'");
                    m.data[got++] = parse_checkpoint_real(token, path);
                }
            }
            matrices.emplace(name, std::move(m));
        } else {
            corrupt(path, "unexpected line '" + line + "'");
        }
    }

    for (const char* key : {"epochs_completed", "final_loss", "visual_dim", "biases"})
        if (!meta.count(key)) corrupt(path, std::string("missing META ") + key);
    c.epochs_completed = static_cast<int>(parse_checkpoint_real(meta["epochs_completed"], path));
    c.final_loss = parse_checkpoint_real(meta["final_loss"], path);
    int visual_dim = static_cast<int>(parse_checkpoint_real(meta["visual_dim"], path));
    bool biases = meta["biases"] == "1";

    try {
        c.params.vocab = Vocabulary::from_word_list(std::move(words));
    } catch (const std::invalid_argument& e) {
        corrupt(path, e.what());
    }
    c.params.visual_dim = visual_dim;

    auto take = [&](const std::string& name) -> Matrix {
        auto it = matrices.find(name);
        if (it == matrices.end()) corrupt(path, "missing matrix '" + name + "'");
        Matrix m = std::move(it->second);
        matrices.erase(it);
        return m;
    };
    auto take_column = [&](const std::string& name) -> RealVector {
        Matrix m = take(name);
        if (m.cols != 1) corrupt(path, "matrix '" + name + "' is not a column");
        return m.data;
    };
    auto load_layer = [&](const std::string& prefix) -> LstmLayerParams {
        LstmLayerParams l;
        l.w_xi = take(prefix + ".w_xi");
        l.w_hi = take(prefix + ".w_hi");
        l.w_xf = take(prefix + ".w_xf");
        l.w_hf = take(prefix + ".w_hf");
        l.w_xo = take(prefix + ".w_xo");
        l.w_ho = take(prefix + ".w_ho");
        l.w_xc = take(prefix + ".w_xc");
        l.w_hc = take(prefix + ".w_hc");
        l.has_bias = biases;
        if (biases) {
            l.b_i = take_column(prefix + ".b_i");
            l.b_f = take_column(prefix + ".b_f");
            l.b_o = take_column(prefix + ".b_o");
            l.b_c = take_column(prefix + ".b_c");
        }
        l.input_dim = l.w_xi.cols;
        l.hidden_dim = l.w_xi.rows;
        return l;
    };
    c.params.layer1 = load_layer("layer1");
    c.params.layer2 = load_layer("layer2");
    c.params.output_proj = take("output_proj");
    if (!matrices.empty())
        corrupt(path, "unexpected matrix '" + matrices.begin()->first + "'");

    // Cross-check every shape against the declared dimensions.
    for (const LstmLayerParams* l : {&c.params.layer1, &c.params.layer2}) {
        int h = l->hidden_dim;
        bool ok = l->w_hi.rows == h && l->w_hi.cols == h && l->w_xf.rows == h &&
                  l->w_xf.cols == l->input_dim && l->w_hf.rows == h && l->w_hf.cols == h &&
                  l->w_xo.rows == h && l->w_xo.cols == l->input_dim && l->w_ho.rows == h &&
                  l->w_ho.cols == h && l->w_xc.rows == h && l->w_xc.cols == l->input_dim &&
                  l->w_hc.rows == h && l->w_hc.cols == h;
        if (biases)
            ok = ok && static_cast<int>(l->b_i.size()) == h &&
                 static_cast<int>(l->b_f.size()) == h && static_cast<int>(l->b_o.size()) == h &&
                 static_cast<int>(l->b_c.size()) == h;
        if (!ok) throw std::runtime_error(path + ": checkpoint shape inconsistency");
    }
    try {
        check_model(c.params);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path + ": checkpoint shape inconsistency: " + e.what());
    }
    return c;
}

}  // namespace seqcap

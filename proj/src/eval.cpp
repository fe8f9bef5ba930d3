#include "seqcap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace seqcap {

namespace {

// n-grams joined on a separator no caption token can contain.
std::string ngram_key(const Tokens& tokens, size_t start, int n) {
    std::string key = tokens[start];
    for (int k = 1; k < n; ++k) {
        key.push_back('\x1f');
        key += tokens[start + k];
    }
    return key;
}

std::map<std::string, int> ngram_counts(const Tokens& tokens, int n) {
    std::map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) >= n)
        for (size_t s = 0; s + n <= tokens.size(); ++s) ++counts[ngram_key(tokens, s, n)];
    return counts;
}

}  // namespace

double bleu4(const std::vector<Tokens>& hypotheses,
             const std::vector<std::vector<Tokens>>& references) {
    if (hypotheses.size() != references.size())
        throw std::invalid_argument("bleu4: hypothesis/reference count mismatch");
    for (const auto& refs : references)
        if (refs.empty()) throw std::invalid_argument("bleu4: empty reference set");

    long long matched[4] = {0, 0, 0, 0};
    long long total[4] = {0, 0, 0, 0};
    long long hyp_len = 0, ref_len = 0;

    for (size_t item = 0; item < hypotheses.size(); ++item) {
        const Tokens& hyp = hypotheses[item];
        const std::vector<Tokens>& refs = references[item];

        hyp_len += static_cast<long long>(hyp.size());
        long long closest = static_cast<long long>(refs[0].size());
        for (const Tokens& ref : refs) {
            long long len = static_cast<long long>(ref.size());
            long long d_new = std::llabs(len - static_cast<long long>(hyp.size()));
            long long d_old = std::llabs(closest - static_cast<long long>(hyp.size()));
            if (d_new < d_old || (d_new == d_old && len < closest)) closest = len;
        }
        ref_len += closest;

        for (int n = 1; n <= 4; ++n) {
            std::map<std::string, int> hyp_counts = ngram_counts(hyp, n);
            std::map<std::string, int> max_ref;
            for (const Tokens& ref : refs)
                for (const auto& [gram, count] : ngram_counts(ref, n))
                    max_ref[gram] = std::max(max_ref[gram], count);
            for (const auto& [gram, count] : hyp_counts) {
                auto it = max_ref.find(gram);
                matched[n - 1] += std::min(count, it == max_ref.end() ? 0 : it->second);
            }
            if (static_cast<int>(hyp.size()) >= n)
                total[n - 1] += static_cast<long long>(hyp.size()) - n + 1;
        }
    }

    double log_precision_sum = 0.0;
    for (int n = 0; n < 4; ++n) {
        if (matched[n] == 0 || total[n] == 0) return 0.0;
        log_precision_sum +=
            std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
    }
    double bp = 1.0;
    if (hyp_len < ref_len)
        bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return bp * std::exp(0.25 * log_precision_sum);
}

PosTag PosLexicon::tag_of(const std::string& w) const {
    auto it = tags.find(w);
    return it == tags.end() ? PosTag::other : it->second;
}

std::string PosLexicon::lemma(const std::string& w) const {
    auto it = verb_lemma.find(w);
    return it == verb_lemma.end() ? w : it->second;
}

PosLexicon lexicon_for(const SyntheticSpec& spec) {
    PosLexicon lex;
    for (const std::string& w : spec.subjects) lex.tags[w] = PosTag::noun;
    for (const std::string& w : spec.objects) lex.tags[w] = PosTag::noun;
    for (const std::string& v : spec.verbs) {
        lex.tags[v] = PosTag::verb;
        lex.verb_lemma[v] = v;
        std::string ing = ing_form(v);
        lex.tags[ing] = PosTag::verb;
        lex.verb_lemma[ing] = v;
    }
    for (const std::string& tmpl : spec.templates) {
        std::istringstream ts(tmpl);
        std::string raw;
        while (ts >> raw) {
            if (raw.find('{') != std::string::npos) continue;
            for (const std::string& w : tokenize(raw))
                lex.tags.emplace(w, PosTag::other);  // never demote a noun/verb
        }
    }
    return lex;
}

void save_lexicon(const PosLexicon& lex, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write lexicon: " + path);
    for (const auto& [word, tag] : lex.tags) {
        if (tag == PosTag::noun) {
            out << word << "\tnoun\n";
        } else if (tag == PosTag::verb) {
            out << word << "\tverb\t" << lex.lemma(word) << '\n';
        } else {
            out << word << "\tother\n";
        }
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

PosLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lexicon: " + path);
    PosLexicon lex;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string word, tag, lemma;
        ls >> word >> tag >> lemma;
        auto fail = [&](const std::string& what) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
        };
        if (word.empty() || tag.empty()) fail("expected word<TAB>tag");
        if (tag == "noun") {
            lex.tags[word] = PosTag::noun;
        } else if (tag == "verb") {
            lex.tags[word] = PosTag::verb;
            lex.verb_lemma[word] = lemma.empty() ? word : lemma;
        } else if (tag == "other") {
            lex.tags[word] = PosTag::other;
        } else {
            fail("unknown tag '" + tag + "'");
        }
    }
    return lex;
}

SvoTriple extract_svo(const Tokens& sentence, const PosLexicon& lex) {
    SvoTriple t;
    size_t pos = 0;
    for (; pos < sentence.size(); ++pos)
        if (lex.tag_of(sentence[pos]) == PosTag::noun) {
            t.subject = sentence[pos];
            break;
        }
    if (!t.subject) return t;
    for (++pos; pos < sentence.size(); ++pos)
        if (lex.tag_of(sentence[pos]) == PosTag::verb) {
            t.verb = lex.lemma(sentence[pos]);
            break;
        }
    if (!t.verb) return t;
    for (++pos; pos < sentence.size(); ++pos)
        if (lex.tag_of(sentence[pos]) == PosTag::noun) {
            t.object = sentence[pos];
            break;
        }
    return t;
}

namespace {

const std::optional<std::string>& slot(const SvoTriple& t, int k) {
    return k == 0 ? t.subject : k == 1 ? t.verb : t.object;
}

std::array<double, 3> svo_accuracy(const std::vector<SvoTriple>& preds,
                                   const std::vector<std::vector<SvoTriple>>& refs,
                                   bool most_frequent) {
    if (preds.size() != refs.size())
        throw std::invalid_argument("svo accuracy: prediction/reference count mismatch");
    std::array<double, 3> out{};
    for (int k = 0; k < 3; ++k) {
        int considered = 0, correct = 0;
        for (size_t item = 0; item < preds.size(); ++item) {
            std::vector<std::string> filled;
            for (const SvoTriple& r : refs[item])
                if (slot(r, k)) filled.push_back(*slot(r, k));
            if (filled.empty()) continue;  // no reference fills the slot
            ++considered;
            const std::optional<std::string>& pred = slot(preds[item], k);
            if (!pred) continue;
            bool hit;
            if (most_frequent) {
                std::map<std::string, int> counts;
                for (const std::string& w : filled) ++counts[w];
                // map iteration is lexicographic, so > keeps the smaller key on ties
                std::string mode;
                int best = 0;
                for (const auto& [w, n] : counts)
                    if (n > best) {
                        best = n;
                        mode = w;
                    }
                hit = *pred == mode;
            } else {
                hit = std::find(filled.begin(), filled.end(), *pred) != filled.end();
            }
            if (hit) ++correct;
        }
        out[k] = considered == 0
                     ? 0.0
                     : 100.0 * static_cast<double>(correct) / static_cast<double>(considered);
    }
    return out;
}

}  // namespace

std::array<double, 3> svo_accuracy_any_valid(const std::vector<SvoTriple>& preds,
                                             const std::vector<std::vector<SvoTriple>>& refs) {
    return svo_accuracy(preds, refs, false);
}

std::array<double, 3> svo_accuracy_most_frequent(const std::vector<SvoTriple>& preds,
                                                 const std::vector<std::vector<SvoTriple>>& refs) {
    return svo_accuracy(preds, refs, true);
}

EvalReport evaluate(const ModelParams& p, const Dataset& d, Split which, const PosLexicon& lex,
                    int max_len) {
    check_model(p);
    std::vector<size_t> idx = d.indices(which);
    if (idx.empty()) throw std::invalid_argument("evaluate: empty split");

    EvalReport report;
    std::vector<Tokens> hyps;
    std::vector<std::vector<Tokens>> refs;
    std::vector<SvoTriple> pred_svo;
    std::vector<std::vector<SvoTriple>> ref_svo;
    for (size_t i : idx) {
        const CaptionedItem& item = d.items[i];
        RealVector feature = mean_pool(item.frames);
        TokenSequence decoded = greedy_decode(p, feature, max_len);
        Tokens hyp = decode_words(p.vocab, decoded);
        report.sentences.emplace_back(item.id, decode(p.vocab, decoded));

        std::vector<Tokens> item_refs;
        std::vector<SvoTriple> item_ref_svo;
        for (const std::string& caption : item.captions) {
            Tokens ref = tokenize(caption);
            item_ref_svo.push_back(extract_svo(ref, lex));
            item_refs.push_back(std::move(ref));
        }
        pred_svo.push_back(extract_svo(hyp, lex));
        hyps.push_back(std::move(hyp));
        refs.push_back(std::move(item_refs));
        ref_svo.push_back(std::move(item_ref_svo));
    }

    report.bleu = bleu4(hyps, refs);
    report.svo_any_valid = svo_accuracy_any_valid(pred_svo, ref_svo);
    report.svo_most_frequent = svo_accuracy_most_frequent(pred_svo, ref_svo);
    return report;
}

std::string serialize(const EvalReport& report) {
    auto metric = [](const std::string& name, double value) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        return "METRIC " + name + ' ' + buf + '\n';
    };
    std::string out;
    out += metric("bleu4", report.bleu);
    const char* slots[3] = {"s", "v", "o"};
    for (int k = 0; k < 3; ++k)
        out += metric(std::string("svo_any_valid_") + slots[k], report.svo_any_valid[k]);
    for (int k = 0; k < 3; ++k)
        out += metric(std::string("svo_most_frequent_") + slots[k], report.svo_most_frequent[k]);
    out += "METRIC meteor unavailable\n";
    for (const auto& [id, sentence] : report.sentences)
        out += "SENT " + id + ' ' + sentence + '\n';
    return out;
}

}  // namespace seqcap

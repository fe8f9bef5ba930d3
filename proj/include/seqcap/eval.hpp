#pragma once

#include "seqcap/data.hpp"
#include "seqcap/model.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace seqcap {

using Tokens = std::vector<std::string>;

// Corpus-level BLEU with n-grams 1..4: clipped modified precisions pooled
// over the whole corpus, geometric mean with uniform 1/4 weights, brevity
// penalty exp(1 - r/c) when the hypothesis corpus is shorter than the
// closest-length references (ties to the shorter reference). No smoothing:
// a zero pooled precision at any order gives 0.
double bleu4(const std::vector<Tokens>& hypotheses,
             const std::vector<std::vector<Tokens>>& references);

struct SvoTriple {
    std::optional<std::string> subject;
    std::optional<std::string> verb;
    std::optional<std::string> object;

    bool operator==(const SvoTriple& o) const = default;
};

enum class PosTag { noun, verb, other };

// Word tags plus a surface-form -> lemma map for verbs ("playing" -> "play").
// Words without an entry count as `other`, so the lexicon only has to cover
// the closed evaluation vocabulary.
struct PosLexicon {
    std::map<std::string, PosTag> tags;
    std::map<std::string, std::string> verb_lemma;

    PosTag tag_of(const std::string& w) const;
    std::string lemma(const std::string& w) const;  // identity when unmapped
};

// Lexicon covering a synthetic corpus: subjects and objects as nouns, verbs
// (base and -ing forms) as verbs with the base form as lemma, every other
// template word as `other`.
PosLexicon lexicon_for(const SyntheticSpec& spec);

// Text format: `word<TAB>tag` or `word<TAB>verb<TAB>lemma` per line,
// '#' comments allowed.
void save_lexicon(const PosLexicon& lex, const std::string& path);
PosLexicon load_lexicon(const std::string& path);

// Rule-based stand-in for a dependency parse, exact on the synthetic
// determiner-noun-aux-verb-(prep)-determiner-noun grammar: subject is the
// first noun, verb the lemma of the first verb after it, object the first
// noun after the verb. Each slot is absent when no token qualifies.
SvoTriple extract_svo(const Tokens& sentence, const PosLexicon& lex);

// Percent of items whose predicted slot matches that slot in ANY reference
// triple. Items where no reference fills the slot are excluded from that
// slot's denominator; an empty denominator scores 0.
std::array<double, 3> svo_accuracy_any_valid(const std::vector<SvoTriple>& preds,
                                             const std::vector<std::vector<SvoTriple>>& refs);

// Same, but the prediction must equal the references' most frequent word
// for the slot (ties broken lexicographically).
std::array<double, 3> svo_accuracy_most_frequent(const std::vector<SvoTriple>& preds,
                                                 const std::vector<std::vector<SvoTriple>>& refs);

struct EvalReport {
    double bleu = 0.0;
    std::array<double, 3> svo_any_valid{};       // subject, verb, object %
    std::array<double, 3> svo_most_frequent{};   // subject, verb, object %
    std::vector<std::pair<std::string, std::string>> sentences;  // (item id, decoded text)

    bool operator==(const EvalReport& o) const = default;
};

// Greedy-decode every item of the chosen split from its mean-pooled
// feature, score corpus BLEU-4 against all of its references, and score
// both SVO protocols with triples rule-extracted from the decoded and
// reference sentences.
EvalReport evaluate(const ModelParams& p, const Dataset& d, Split which,
                    const PosLexicon& lex, int max_len = 30);

// One `METRIC <name> <value>` line per scalar (METEOR is reported as
// unavailable), then one `SENT <id> <decoded caption>` line per item.
std::string serialize(const EvalReport& report);

}  // namespace seqcap

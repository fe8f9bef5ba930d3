#pragma once

#include "seqcap/numerics.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace seqcap {

// Encoded sentence: word indices with a single trailing EOS.
using TokenSequence = std::vector<int>;

// Word <-> index map. Indices 0..2 are reserved for BOS, EOS and UNK; the
// remaining words are stored sorted so construction is order-independent.
class Vocabulary {
public:
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;
    static constexpr int kUnk = 2;

    static const std::string& bos_word();
    static const std::string& eos_word();
    static const std::string& unk_word();

    Vocabulary();

    // `words` must already include the reserved tokens at indices 0..2.
    // Order is preserved verbatim (checkpoint loads depend on it).
    static Vocabulary from_word_list(std::vector<std::string> words);

    int size() const { return static_cast<int>(words_.size()); }
    bool contains(const std::string& w) const { return index_.count(w) > 0; }
    // Unknown words map to UNK.
    int index_of(const std::string& w) const;
    const std::string& word_at(int idx) const;
    const std::vector<std::string>& words() const { return words_; }

    bool operator==(const Vocabulary& o) const { return words_ == o.words_; }

private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

// Lowercase, split on whitespace, strip punctuation from token edges.
std::vector<std::string> tokenize(const std::string& caption);

// Union of all caption tokens, sorted, plus the reserved tokens.
// Throws on an empty caption list.
Vocabulary build_vocabulary(const std::vector<std::string>& captions);

// Set union of the non-reserved words, re-sorted.
Vocabulary merge_vocabularies(const Vocabulary& a, const Vocabulary& b);

// Tokens mapped to indices (unknowns to UNK), EOS appended.
TokenSequence encode(const Vocabulary& v, const std::string& caption);

// Words for the non-EOS tokens. Inverse of encode for in-vocabulary text.
std::vector<std::string> decode_words(const Vocabulary& v, const TokenSequence& seq);
std::string decode(const Vocabulary& v, const TokenSequence& seq);

bool is_well_formed(const TokenSequence& seq, int vocab_size);

struct CaptionedItem {
    std::string id;
    std::vector<RealVector> frames;
    std::vector<std::string> captions;
    // Ground-truth triple for synthetic items; not persisted to files.
    std::optional<std::array<std::string, 3>> latent_svo;

    bool operator==(const CaptionedItem& o) const = default;
};

enum class Split { train, val, test };

struct Dataset {
    std::vector<CaptionedItem> items;
    std::vector<Split> assignment;  // parallel to items; defaults to train

    std::vector<size_t> indices(Split s) const;
    void tag_all(Split s);
    std::vector<std::string> all_captions() const;

    bool operator==(const Dataset& o) const = default;
};

// Features file: one record per line, `id<TAB>dim<TAB>frame_count<TAB>v1,v2,...`
// with the frames concatenated; '#' starts a comment line.
// Captions file: `id<TAB>caption text`, multiple lines per id accumulate.
// Items are joined on id; an id present in only one file is an error.
Dataset load_dataset(const std::string& features_path, const std::string& captions_path);
void save_dataset(const Dataset& d, const std::string& features_path,
                  const std::string& captions_path);

// Features only; every item's caption list is left empty. For decoding
// unlabeled inputs.
Dataset load_features(const std::string& features_path);

enum class SynthDomain { image, video };

// Closed-world caption generator standing in for a real corpus. Each item
// draws a latent (subject, verb, object) triple; its frames are the three
// word prototypes summed plus independent gaussian noise; captions come
// from the template patterns ({s}/{v}/{o} placeholders, {v} rendered in
// -ing form).
struct SyntheticSpec {
    std::vector<std::string> subjects;
    std::vector<std::string> verbs;
    std::vector<std::string> objects;
    int visual_dim = 32;
    double noise_sigma = 0.0;
    int captions_per_item = 3;
    std::vector<std::string> templates;
    SynthDomain domain = SynthDomain::video;
    int min_frames = 1;
    int max_frames = 5;

    static SyntheticSpec video_default();
    static SyntheticSpec image_default();
};

// Fixed random vector for a word, keyed only by (word, dim) so image- and
// video-domain corpora share feature geometry regardless of seeds.
RealVector word_prototype(const std::string& word, int dim);

// "play" -> "playing", "ride" -> "riding", "run" -> "running".
std::string ing_form(const std::string& verb);

Dataset synth_generate(const SyntheticSpec& spec, SeededRng& rng, int n_items);

// Seeded shuffle, then contiguous train/val/test assignment.
// Default fractions follow the 1200/100/670 corpus split.
Dataset split(const Dataset& d, double train_frac, double val_frac, double test_frac,
              SeededRng& rng);

constexpr double kDefaultTrainFrac = 1200.0 / 1970.0;
constexpr double kDefaultValFrac = 100.0 / 1970.0;
constexpr double kDefaultTestFrac = 670.0 / 1970.0;

}  // namespace seqcap

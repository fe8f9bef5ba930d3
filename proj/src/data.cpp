#include "seqcap/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace seqcap {

namespace {

const std::string kBosWord = "<bos>";
const std::string kEosWord = "<eos>";
const std::string kUnkWord = "<unk>";

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void parse_error(const std::string& path, int line_no, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

double parse_real(const std::string& s, const std::string& path, int line_no) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        parse_error(path, line_no, "malformed real value '" + s + "'");
    if (!std::isfinite(v))
        parse_error(path, line_no, "non-finite value '" + s + "'");
    return v;
}

long parse_count(const std::string& s, const std::string& path, int line_no,
                 const std::string& field) {
    const char* begin = s.c_str();
    char* end = nullptr;
    long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0' || v < 1)
        parse_error(path, line_no, "invalid " + field + " '" + s + "'");
    return v;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

}  // namespace

const std::string& Vocabulary::bos_word() { return kBosWord; }
const std::string& Vocabulary::eos_word() { return kEosWord; }
const std::string& Vocabulary::unk_word() { return kUnkWord; }

Vocabulary::Vocabulary() {
    words_ = {kBosWord, kEosWord, kUnkWord};
    for (int i = 0; i < 3; ++i) index_[words_[i]] = i;
}

Vocabulary Vocabulary::from_word_list(std::vector<std::string> words) {
    if (words.size() < 3 || words[kBos] != kBosWord || words[kEos] != kEosWord ||
        words[kUnk] != kUnkWord)
        throw std::invalid_argument("vocabulary word list must start with the reserved tokens");
    Vocabulary v;
    v.words_ = std::move(words);
    v.index_.clear();
    for (size_t i = 0; i < v.words_.size(); ++i) {
        if (!v.index_.emplace(v.words_[i], static_cast<int>(i)).second)
            throw std::invalid_argument("duplicate word in vocabulary: " + v.words_[i]);
    }
    return v;
}

int Vocabulary::index_of(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word_at(int idx) const {
    if (idx < 0 || idx >= size()) throw std::out_of_range("word index out of range");
    return words_[idx];
}

std::vector<std::string> tokenize(const std::string& caption) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        // Trim punctuation from both edges; interior punctuation stays.
        size_t b = 0, e = current.size();
        while (b < e && std::ispunct(static_cast<unsigned char>(current[b]))) ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(current[e - 1]))) --e;
        if (e > b) tokens.push_back(current.substr(b, e - b));
        current.clear();
    };
    for (char ch : caption) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            flush();
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    flush();
    return tokens;
}

Vocabulary build_vocabulary(const std::vector<std::string>& captions) {
    if (captions.empty()) throw std::invalid_argument("build_vocabulary: no captions");
    std::set<std::string> unique;
    for (const std::string& c : captions)
        for (std::string& t : tokenize(c)) unique.insert(std::move(t));
    std::vector<std::string> words = {kBosWord, kEosWord, kUnkWord};
    words.insert(words.end(), unique.begin(), unique.end());
    return Vocabulary::from_word_list(std::move(words));
}

Vocabulary merge_vocabularies(const Vocabulary& a, const Vocabulary& b) {
    std::set<std::string> unique;
    for (int i = 3; i < a.size(); ++i) unique.insert(a.word_at(i));
    for (int i = 3; i < b.size(); ++i) unique.insert(b.word_at(i));
    std::vector<std::string> words = {kBosWord, kEosWord, kUnkWord};
    words.insert(words.end(), unique.begin(), unique.end());
    return Vocabulary::from_word_list(std::move(words));
}

TokenSequence encode(const Vocabulary& v, const std::string& caption) {
    TokenSequence seq;
    for (const std::string& t : tokenize(caption)) seq.push_back(v.index_of(t));
    seq.push_back(Vocabulary::kEos);
    return seq;
}

std::vector<std::string> decode_words(const Vocabulary& v, const TokenSequence& seq) {
    std::vector<std::string> words;
    for (int idx : seq)
        if (idx != Vocabulary::kEos) words.push_back(v.word_at(idx));
    return words;
}

std::string decode(const Vocabulary& v, const TokenSequence& seq) {
    std::string out;
    for (const std::string& w : decode_words(v, seq)) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

bool is_well_formed(const TokenSequence& seq, int vocab_size) {
    if (seq.empty() || seq.back() != Vocabulary::kEos) return false;
    for (size_t i = 0; i + 1 < seq.size(); ++i)
        if (seq[i] == Vocabulary::kEos) return false;
    for (int t : seq)
        if (t < 0 || t >= vocab_size) return false;
    return true;
}

std::vector<size_t> Dataset::indices(Split s) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < items.size(); ++i) {
        // Items beyond the assignment vector default to train.
        Split a = i < assignment.size() ? assignment[i] : Split::train;
        if (a == s) out.push_back(i);
    }
    return out;
}

void Dataset::tag_all(Split s) { assignment.assign(items.size(), s); }

std::vector<std::string> Dataset::all_captions() const {
    std::vector<std::string> out;
    for (const CaptionedItem& item : items)
        out.insert(out.end(), item.captions.begin(), item.captions.end());
    return out;
}

Dataset load_features(const std::string& features_path) {
    std::ifstream ff(features_path);
    if (!ff) throw std::runtime_error("cannot open features file: " + features_path);

    Dataset d;
    std::map<std::string, size_t> by_id;
    std::string line;
    int line_no = 0;
    while (std::getline(ff, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields = split_fields(line, '\t');
        if (fields.size() != 4)
            parse_error(features_path, line_no, "expected 4 tab-separated fields");
        const std::string& id = fields[0];
        if (id.empty()) parse_error(features_path, line_no, "empty id");
        if (by_id.count(id)) parse_error(features_path, line_no, "duplicate id '" + id + "'");
        long dim = parse_count(fields[1], features_path, line_no, "dim");
        long frame_count = parse_count(fields[2], features_path, line_no, "frame_count");
        std::vector<std::string> values = split_fields(fields[3], ',');
        if (static_cast<long>(values.size()) != dim * frame_count)
            parse_error(features_path, line_no,
                        "expected " + std::to_string(dim * frame_count) + " values, got " +
                            std::to_string(values.size()));
        CaptionedItem item;
        item.id = id;
        item.frames.resize(frame_count, RealVector(dim));
        for (long k = 0; k < dim * frame_count; ++k)
            item.frames[k / dim][k % dim] = parse_real(values[k], features_path, line_no);
        by_id[id] = d.items.size();
        d.items.push_back(std::move(item));
    }
    d.assignment.assign(d.items.size(), Split::train);
    return d;
}

Dataset load_dataset(const std::string& features_path, const std::string& captions_path) {
    Dataset d = load_features(features_path);
    std::map<std::string, size_t> by_id;
    for (size_t i = 0; i < d.items.size(); ++i) by_id[d.items[i].id] = i;

    std::ifstream cf(captions_path);
    if (!cf) throw std::runtime_error("cannot open captions file: " + captions_path);
    std::string line;
    int line_no = 0;
    while (std::getline(cf, line)) {
        ++line_no;
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            parse_error(captions_path, line_no, "expected id<TAB>caption");
        std::string id = line.substr(0, tab);
        if (id.empty()) parse_error(captions_path, line_no, "empty id");
        auto it = by_id.find(id);
        if (it == by_id.end())
            parse_error(captions_path, line_no, "dangling id '" + id + "' (no features)");
        d.items[it->second].captions.push_back(line.substr(tab + 1));
    }

    for (const CaptionedItem& item : d.items)
        if (item.captions.empty())
            throw std::runtime_error(features_path + ": dangling id '" + item.id +
                                     "' (no captions)");

    d.assignment.assign(d.items.size(), Split::train);
    return d;
}

void save_dataset(const Dataset& d, const std::string& features_path,
                  const std::string& captions_path) {
    std::ofstream ff(features_path);
    if (!ff) throw std::runtime_error("cannot write features file: " + features_path);
    for (const CaptionedItem& item : d.items) {
        if (item.frames.empty()) throw std::runtime_error("item '" + item.id + "' has no frames");
        size_t dim = item.frames[0].size();
        ff << item.id << '\t' << dim << '\t' << item.frames.size() << '\t';
        bool first = true;
        for (const RealVector& frame : item.frames) {
            if (frame.size() != dim)
                throw std::runtime_error("item '" + item.id + "' has inconsistent frame dims");
            for (double v : frame) {
                if (!first) ff << ',';
                ff << format_real(v);
                first = false;
            }
        }
        ff << '\n';
    }

    std::ofstream cf(captions_path);
    if (!cf) throw std::runtime_error("cannot write captions file: " + captions_path);
    for (const CaptionedItem& item : d.items)
        for (const std::string& c : item.captions) cf << item.id << '\t' << c << '\n';
}

SyntheticSpec SyntheticSpec::video_default() {
    SyntheticSpec s;
    s.subjects = {"cat", "dog", "man", "woman", "monkey", "baby", "bird", "horse"};
    s.verbs = {"play", "eat", "ride", "hold", "watch", "chase", "push", "lift"};
    s.objects = {"ball", "toy", "guitar", "apple", "bike", "book", "stick", "drum"};
    s.templates = {
        "a {s} is {v} a {o}",
        "the {s} is {v} the {o}",
        "a {s} is {v} with a {o}",
        "one {s} is {v} near a {o}",
    };
    s.domain = SynthDomain::video;
    return s;
}

SyntheticSpec SyntheticSpec::image_default() {
    SyntheticSpec s = video_default();
    s.templates = {
        "a {s} with a {o}",
        "the {s} and the {o}",
        "a {s} near a {o}",
        "one {s} with the {o}",
    };
    s.domain = SynthDomain::image;
    s.min_frames = 1;
    s.max_frames = 1;  // still images
    return s;
}

RealVector word_prototype(const std::string& word, int dim) {
    SeededRng rng(fnv1a64(word) ^ (static_cast<uint64_t>(dim) * 0x9e3779b97f4a7c15ull));
    RealVector v(dim);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

std::string ing_form(const std::string& verb) {
    size_t n = verb.size();
    if (n >= 2 && verb.substr(n - 2) == "ie") return verb.substr(0, n - 2) + "ying";
    if (n >= 2 && verb.back() == 'e' && verb[n - 2] != 'e') return verb.substr(0, n - 1) + "ing";
    if (n >= 3) {
        char a = verb[n - 3], b = verb[n - 2], c = verb[n - 1];
        if (!is_vowel(a) && is_vowel(b) && !is_vowel(c) && c != 'w' && c != 'x' && c != 'y')
            return verb + c + "ing";
    }
    return verb + "ing";
}

namespace {

std::string render_template(const std::string& tmpl, const std::string& s,
                            const std::string& v, const std::string& o) {
    std::string out;
    for (size_t i = 0; i < tmpl.size();) {
        if (tmpl.compare(i, 3, "{s}") == 0) {
            out += s;
            i += 3;
        } else if (tmpl.compare(i, 3, "{v}") == 0) {
            out += ing_form(v);
            i += 3;
        } else if (tmpl.compare(i, 3, "{o}") == 0) {
            out += o;
            i += 3;
        } else {
            out.push_back(tmpl[i]);
            ++i;
        }
    }
    return out;
}

void check_synth_spec(const SyntheticSpec& spec) {
    if (spec.subjects.empty() || spec.verbs.empty() || spec.objects.empty())
        throw std::invalid_argument("synth_generate: word sets must be non-empty");
    if (spec.templates.empty()) throw std::invalid_argument("synth_generate: no templates");
    if (spec.noise_sigma < 0.0) throw std::invalid_argument("synth_generate: negative noise");
    if (spec.visual_dim < 1) throw std::invalid_argument("synth_generate: visual_dim must be >= 1");
    if (spec.captions_per_item < 1)
        throw std::invalid_argument("synth_generate: captions_per_item must be >= 1");
    if (spec.min_frames < 1 || spec.max_frames < spec.min_frames)
        throw std::invalid_argument("synth_generate: bad frame range");
    for (const auto* set : {&spec.subjects, &spec.verbs, &spec.objects})
        for (const std::string& w : *set)
            if (w == kBosWord || w == kEosWord || w == kUnkWord)
                throw std::invalid_argument("synth_generate: word set collides with reserved token");
}

}  // namespace

Dataset synth_generate(const SyntheticSpec& spec, SeededRng& rng, int n_items) {
    check_synth_spec(spec);
    if (n_items < 1) throw std::invalid_argument("synth_generate: n_items must be >= 1");

    const char* prefix = spec.domain == SynthDomain::video ? "vid" : "img";
    Dataset d;
    d.items.reserve(n_items);
    for (int k = 0; k < n_items; ++k) {
        const std::string& s = spec.subjects[rng.next_below(spec.subjects.size())];
        const std::string& v = spec.verbs[rng.next_below(spec.verbs.size())];
        const std::string& o = spec.objects[rng.next_below(spec.objects.size())];

        RealVector clean(spec.visual_dim, 0.0);
        for (const std::string* w : {&s, &v, &o}) {
            RealVector proto = word_prototype(*w, spec.visual_dim);
            for (int i = 0; i < spec.visual_dim; ++i) clean[i] += proto[i];
        }

        CaptionedItem item;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%05d", prefix, k);
        item.id = buf;

        int n_frames = spec.min_frames +
                       static_cast<int>(rng.next_below(spec.max_frames - spec.min_frames + 1));
        item.frames.resize(n_frames, clean);
        if (spec.noise_sigma > 0.0)
            for (RealVector& frame : item.frames)
                for (double& x : frame) x += rng.gaussian(0.0, spec.noise_sigma);

        for (int j = 0; j < spec.captions_per_item; ++j) {
            const std::string& tmpl = spec.templates[rng.next_below(spec.templates.size())];
            item.captions.push_back(render_template(tmpl, s, v, o));
        }
        item.latent_svo = std::array<std::string, 3>{s, v, o};
        d.items.push_back(std::move(item));
    }
    d.assignment.assign(d.items.size(), Split::train);
    return d;
}

Dataset split(const Dataset& d, double train_frac, double val_frac, double test_frac,
              SeededRng& rng) {
    if (train_frac < 0 || val_frac < 0 || test_frac < 0)
        throw std::invalid_argument("split: fractions must be non-negative");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");
    size_t n = d.items.size();
    if (n < 3) throw std::invalid_argument("split: need at least 3 items");

    size_t n_train = static_cast<size_t>(std::llround(train_frac * static_cast<double>(n)));
    size_t n_val = static_cast<size_t>(std::llround(val_frac * static_cast<double>(n)));
    if (n_train > n) n_train = n;
    if (n_train + n_val > n) n_val = n - n_train;

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    Dataset out = d;
    out.assignment.assign(n, Split::train);  // tolerate a short or empty input assignment
    for (size_t pos = 0; pos < n; ++pos) {
        Split s = pos < n_train ? Split::train : pos < n_train + n_val ? Split::val : Split::test;
        out.assignment[order[pos]] = s;
    }
    return out;
}

}  // namespace seqcap

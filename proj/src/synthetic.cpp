#include "pairkit/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "pairkit/error.hpp"
#include "pairkit/rng.hpp"

namespace pairkit {

namespace {

constexpr std::array<const char*, 20> kSyllables = {"ba", "ko", "ri", "mu", "se", "ta", "ne", "lo", "vi", "du",
                                                    "pe", "ga", "zo", "fi", "hu", "ma", "ki", "ro", "sa", "te"};

// Three base-20 digits mapped to syllables; distinct indices give distinct words.
std::string pseudo_word(std::size_t index) {
    std::string w;
    for (int i = 0; i < 3; ++i) {
        w += kSyllables[index % kSyllables.size()];
        index /= kSyllables.size();
    }
    return w;
}

template <class T>
const T& pick(const std::vector<T>& pool, Rng& rng) {
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

}  // namespace

TemplateFamily make_family(std::size_t n_attr, std::size_t n_subjects, std::size_t n_context) {
    if (n_attr == 0 || n_subjects == 0 || n_context == 0)
        throw Error(ErrorKind::Usage, "template family pools must be non-empty");
    if (2 * n_attr + n_subjects + n_context > kSyllables.size() * kSyllables.size() * kSyllables.size())
        throw Error(ErrorKind::Usage, "template family too large");
    TemplateFamily fam;
    std::size_t next = 0;
    for (std::size_t i = 0; i < n_subjects; ++i) fam.subjects.push_back(pseudo_word(next++));
    for (std::size_t i = 0; i < n_attr; ++i) fam.true_words.push_back(pseudo_word(next++));
    for (std::size_t i = 0; i < n_attr; ++i) fam.false_words.push_back(pseudo_word(next++));
    for (std::size_t i = 0; i < n_context; ++i) fam.context.push_back(pseudo_word(next++));
    return fam;
}

PairedDataset make_synthetic_corpus(const TemplateFamily& family, const SyntheticOptions& opts, std::string name) {
    const std::size_t end = std::min({opts.attr_end, family.true_words.size(), family.false_words.size()});
    if (opts.attr_begin >= end) throw Error(ErrorKind::Usage, "empty attribute slice");
    const std::vector<std::string> trues(family.true_words.begin() + static_cast<std::ptrdiff_t>(opts.attr_begin),
                                         family.true_words.begin() + static_cast<std::ptrdiff_t>(end));
    const std::vector<std::string> falses(family.false_words.begin() + static_cast<std::ptrdiff_t>(opts.attr_begin),
                                          family.false_words.begin() + static_cast<std::ptrdiff_t>(end));

    Rng rng(opts.seed);
    PairedDataset data;
    data.name = std::move(name);
    data.pairs.reserve(opts.n_pairs);
    for (std::size_t i = 0; i < opts.n_pairs; ++i) {
        const std::string& subject = pick(family.subjects, rng);
        const std::string& t = pick(trues, rng);
        const std::string& f = pick(falses, rng);
        std::string tail;
        for (std::size_t c = 0; c < opts.context_words; ++c) tail += " " + pick(family.context, rng);

        StatementPair p;
        char id[48];
        std::snprintf(id, sizeof id, "%s%05zu", opts.id_prefix.c_str(), i);
        p.id = id;
        p.label_1 = rng.coin();
        p.label_2 = !p.label_1;
        p.sent_1 = subject + " is " + (p.label_1 ? t : f) + tail;
        p.sent_2 = subject + " is " + (p.label_2 ? t : f) + tail;
        p.domain = static_cast<Domain>(rng.below(3));
        p.scenario = static_cast<Scenario>(rng.below(2));
        p.numeracy = rng.coin();
        data.pairs.push_back(std::move(p));
    }
    return data;
}

}  // namespace pairkit

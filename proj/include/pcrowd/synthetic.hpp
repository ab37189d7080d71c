#pragma once

#include <cstdint>
#include <vector>

#include "pcrowd/datasets.hpp"
#include "pcrowd/persona_corpus.hpp"

// Seeded synthetic corpora for offline runs and tests.
namespace pcrowd::synthetic {

// Descriptions built from a few dozen occupational themes, so personas of
// the same theme share vocabulary and form clusters in a bag-of-words space.
std::vector<Persona> personas(std::size_t n, std::uint64_t seed);

// Six 1-5 ratings per instance; human_mean and the binarized label follow
// from them. Roughly 30% aae, 30% anti_black, the rest vulgar.
SingleLabelDataset single_label(std::size_t n, std::uint64_t seed);

// Like single_label, but every human_mean is drawn uniformly from
// [lo, hi] (no ratings behind it).
SingleLabelDataset single_label_with_means(std::size_t n, double lo, double hi,
                                           std::uint64_t seed);

// Fully populated instances x annotators rating matrix.
MultiLabelDataset multi_label(std::size_t num_instances, std::size_t num_annotators,
                              std::uint64_t seed);

std::vector<PersonaTemplate> templates(std::size_t n, std::uint64_t seed);

}  // namespace pcrowd::synthetic

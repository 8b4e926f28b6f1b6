#include "exattn/study/questionnaire.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <stdexcept>

namespace exattn::study {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "unknown";
}

std::string_view to_string(Phase p) { return p == Phase::setup ? "setup" : "followup"; }

Difficulty difficulty_from_string(std::string_view s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  throw std::invalid_argument("unknown difficulty '" + std::string(s) + "'");
}

Phase phase_from_string(std::string_view s) {
  if (s == "setup") return Phase::setup;
  if (s == "followup") return Phase::followup;
  throw std::invalid_argument("unknown phase '" + std::string(s) + "'");
}

double LevelWeights::of(Difficulty d) const noexcept {
  switch (d) {
    case Difficulty::easy: return easy;
    case Difficulty::medium: return medium;
    case Difficulty::hard: return hard;
  }
  return 0.0;
}

std::size_t DifficultyCounts::of(Difficulty d) const noexcept {
  switch (d) {
    case Difficulty::easy: return easy;
    case Difficulty::medium: return medium;
    case Difficulty::hard: return hard;
  }
  return 0;
}

double full_mark(const DifficultyCounts& counts, const LevelWeights& w) {
  return static_cast<double>(counts.easy) * w.easy + static_cast<double>(counts.medium) * w.medium +
         static_cast<double>(counts.hard) * w.hard;
}

const Trial* Questionnaire::find(const std::string& trial_id) const {
  for (const auto& t : trials)
    if (t.id == trial_id) return &t;
  return nullptr;
}

namespace {

constexpr Difficulty kLevels[] = {Difficulty::easy, Difficulty::medium, Difficulty::hard};

struct Entry {
  std::string id;
  std::string species, family, order;
};

std::string numbered(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, n);
  return buf;
}

bool is_distractor(Difficulty d, const Entry& q, const Entry& c) {
  switch (d) {
    case Difficulty::easy: return c.order != q.order;
    case Difficulty::medium: return c.order == q.order && c.family != q.family;
    case Difficulty::hard: return c.family == q.family && c.species != q.species;
  }
  return false;
}

// Grouping that galleries spread across where the catalog allows.
const std::string& diversity_key(Difficulty d, const Entry& c) {
  switch (d) {
    case Difficulty::easy: return c.order;
    case Difficulty::medium: return c.family;
    case Difficulty::hard: return c.species;
  }
  return c.species;
}

std::string bucket_requirement(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "needs at least 2 orders and 4 items outside the query's order";
    case Difficulty::medium: return "needs an order with at least 2 families and 4 items in sibling families";
    case Difficulty::hard: return "needs a family with at least 2 species and 4 items of sibling species";
  }
  return {};
}

void shuffle_gallery(Trial& t, std::mt19937_64& rng) {
  const std::string positive = t.gallery[t.answer];
  std::shuffle(t.gallery.begin(), t.gallery.end(), rng);
  t.answer = static_cast<std::size_t>(std::find(t.gallery.begin(), t.gallery.end(), positive) - t.gallery.begin());
}

}  // namespace

Questionnaire generate_questionnaire(const data::Dataset& catalog, const DifficultyCounts& counts, std::uint64_t seed,
                                     std::string session_id) {
  std::vector<Entry> entries;
  std::map<std::string, std::vector<std::size_t>> by_species;
  for (const auto& item : catalog.items) {
    const auto& rank = catalog.taxonomy.rank(item.species);
    by_species[item.species].push_back(entries.size());
    entries.push_back({item.id, item.species, rank.family, rank.order});
  }

  std::mt19937_64 rng(seed);
  std::vector<Trial> trials;
  for (Difficulty level : kLevels) {
    const std::size_t wanted = counts.of(level);
    if (wanted == 0) continue;
    std::vector<std::size_t> queries;
    for (std::size_t q = 0; q < entries.size(); ++q) {
      if (by_species[entries[q].species].size() < 2) continue;
      std::size_t pool = 0;
      for (const auto& c : entries) pool += is_distractor(level, entries[q], c) ? 1 : 0;
      if (pool >= kGallerySize - 1) queries.push_back(q);
    }
    if (queries.empty())
      throw std::invalid_argument("taxonomy too small for the " + std::string(to_string(level)) + " bucket: " +
                                  bucket_requirement(level));
    std::shuffle(queries.begin(), queries.end(), rng);
    for (std::size_t n = 0; n < wanted; ++n) {
      const Entry& q = entries[queries[n % queries.size()]];
      std::vector<std::size_t> positives;
      for (std::size_t i : by_species[q.species])
        if (entries[i].id != q.id) positives.push_back(i);
      const Entry& positive = entries[positives[std::uniform_int_distribution<std::size_t>(0, positives.size() - 1)(rng)]];

      std::map<std::string, std::vector<std::size_t>> groups;
      for (std::size_t c = 0; c < entries.size(); ++c)
        if (is_distractor(level, q, entries[c])) groups[diversity_key(level, entries[c])].push_back(c);
      std::vector<std::vector<std::size_t>> order;
      for (auto& [key, members] : groups) {
        std::shuffle(members.begin(), members.end(), rng);
        order.push_back(std::move(members));
      }
      std::shuffle(order.begin(), order.end(), rng);

      Trial t;
      t.query = q.id;
      t.difficulty = level;
      t.phase = Phase::setup;
      t.gallery[0] = positive.id;
      t.answer = 0;
      std::size_t filled = 1;
      for (std::size_t round = 0; filled < kGallerySize; ++round) {
        for (const auto& members : order) {
          if (round < members.size() && filled < kGallerySize) t.gallery[filled++] = entries[members[round]].id;
        }
      }
      shuffle_gallery(t, rng);
      trials.push_back(std::move(t));
    }
  }
  std::shuffle(trials.begin(), trials.end(), rng);
  for (std::size_t i = 0; i < trials.size(); ++i) trials[i].id = numbered('t', i + 1);

  Questionnaire out;
  out.session_id = std::move(session_id);
  out.seed = seed;
  out.phase = Phase::setup;
  out.counts = counts;
  out.trials = std::move(trials);
  return out;
}

Questionnaire build_followup(const Questionnaire& setup, std::span<const SetupOutcome> outcomes,
                             const HighlightSource& highlights, std::size_t k, std::uint64_t seed) {
  if (k > analysis::kComfortZoneMax)
    throw std::invalid_argument("K=" + std::to_string(k) + " exceeds the comfort zone of " +
                                std::to_string(analysis::kComfortZoneMax) + " highlighted regions");
  std::vector<const Trial*> failed, succeeded;
  for (const auto& o : outcomes) {
    const Trial* t = setup.find(o.trial_id);
    if (!t) throw std::invalid_argument("outcome for unknown setup trial '" + o.trial_id + "'");
    (o.correct ? succeeded : failed).push_back(t);
  }

  std::mt19937_64 rng(seed);
  auto highlight_for = [&](const Trial& src, bool required) -> std::optional<analysis::HighlightSpec> {
    std::optional<std::vector<double>> s = highlights ? highlights(src.query) : std::nullopt;
    if (!s) {
      if (required) throw std::invalid_argument("no highlight attention for failed query '" + src.query + "'");
      return std::nullopt;
    }
    return analysis::export_highlights(src.query, *s, k);
  };

  std::vector<Trial> trials;
  for (const Trial* src : failed) {
    Trial t = *src;
    t.phase = Phase::followup;
    t.scorable = true;
    t.source_trial_id = src->id;
    t.highlights = highlight_for(*src, true);
    trials.push_back(std::move(t));
  }
  std::shuffle(succeeded.begin(), succeeded.end(), rng);
  const std::size_t fillers = std::min(succeeded.size(), failed.size());
  for (std::size_t i = 0; i < fillers; ++i) {
    Trial t = *succeeded[i];
    t.phase = Phase::followup;
    t.scorable = false;
    t.source_trial_id = succeeded[i]->id;
    t.highlights = highlight_for(*succeeded[i], false);
    trials.push_back(std::move(t));
  }
  std::shuffle(trials.begin(), trials.end(), rng);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    trials[i].id = numbered('f', i + 1);
    shuffle_gallery(trials[i], rng);
  }

  Questionnaire out;
  out.session_id = setup.session_id;
  out.seed = seed;
  out.phase = Phase::followup;
  out.counts = setup.counts;
  out.trials = std::move(trials);
  return out;
}

}  // namespace exattn::study

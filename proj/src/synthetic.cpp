#include "pcrowd/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "pcrowd/common.hpp"

namespace pcrowd::synthetic {

namespace {

struct Theme {
  std::array<const char*, 3> roles;
  std::array<const char*, 6> topics;
};

constexpr std::array<Theme, 24> kThemes = {{
    {{"nurse", "paramedic", "midwife"}, {"patients", "clinics", "triage", "vaccines", "wards", "recovery"}},
    {{"teacher", "tutor", "principal"}, {"classrooms", "students", "curricula", "homework", "literacy", "exams"}},
    {{"engineer", "developer", "programmer"}, {"software", "databases", "compilers", "servers", "debugging", "algorithms"}},
    {{"farmer", "rancher", "grower"}, {"crops", "cattle", "harvests", "irrigation", "soil", "tractors"}},
    {{"chef", "baker", "cook"}, {"recipes", "pastries", "kitchens", "spices", "menus", "sourdough"}},
    {{"lawyer", "attorney", "paralegal"}, {"contracts", "courts", "litigation", "clients", "statutes", "appeals"}},
    {{"musician", "composer", "guitarist"}, {"concerts", "melodies", "albums", "jazz", "orchestras", "rehearsals"}},
    {{"journalist", "reporter", "editor"}, {"newspapers", "headlines", "interviews", "deadlines", "sources", "investigations"}},
    {{"biologist", "ecologist", "botanist"}, {"species", "habitats", "wetlands", "pollinators", "forests", "genomes"}},
    {{"accountant", "auditor", "bookkeeper"}, {"ledgers", "taxes", "invoices", "budgets", "payroll", "spreadsheets"}},
    {{"athlete", "coach", "trainer"}, {"marathons", "workouts", "tournaments", "stamina", "teams", "injuries"}},
    {{"historian", "archivist", "curator"}, {"manuscripts", "museums", "archives", "empires", "artifacts", "chronicles"}},
    {{"pilot", "navigator", "aviator"}, {"aircraft", "runways", "cockpits", "flights", "airports", "turbulence"}},
    {{"painter", "sculptor", "illustrator"}, {"canvases", "galleries", "portraits", "murals", "sketches", "pigments"}},
    {{"mechanic", "welder", "machinist"}, {"engines", "garages", "gearboxes", "repairs", "tools", "motorcycles"}},
    {{"economist", "analyst", "banker"}, {"markets", "inflation", "interest", "investments", "forecasts", "currencies"}},
    {{"gardener", "landscaper", "florist"}, {"roses", "hedges", "bouquets", "greenhouses", "seedlings", "compost"}},
    {{"priest", "chaplain", "theologian"}, {"sermons", "congregations", "scripture", "prayer", "parishes", "faith"}},
    {{"astronomer", "physicist", "cosmologist"}, {"galaxies", "telescopes", "quasars", "orbits", "particles", "nebulae"}},
    {{"carpenter", "plumber", "electrician"}, {"houses", "pipes", "wiring", "renovations", "cabinets", "lumber"}},
    {{"psychologist", "therapist", "counselor"}, {"anxiety", "families", "trauma", "sessions", "wellbeing", "grief"}},
    {{"soldier", "veteran", "officer"}, {"deployments", "barracks", "missions", "discipline", "medals", "platoons"}},
    {{"gamer", "streamer", "esports"}, {"tournaments", "consoles", "speedruns", "livestreams", "controllers", "leaderboards"}},
    {{"retiree", "grandparent", "pensioner"}, {"grandchildren", "cruises", "knitting", "bingo", "gardens", "memoirs"}},
}};

constexpr std::array<const char*, 10> kAdjectives = {
    "young", "retired", "experienced", "ambitious", "curious",
    "skeptical", "friendly", "competitive", "thoughtful", "busy"};

constexpr std::array<const char*, 8> kVerbs = {
    "loves", "studies", "writes about", "worries about",
    "teaches about", "collects", "debates", "organizes"};

template <typename Arr>
const char* pick(Rng& rng, const Arr& arr) {
  return arr[static_cast<std::size_t>(uniform_below(rng, arr.size()))];
}

std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

Instance make_instance(std::size_t i, Rng& rng) {
  Instance inst;
  inst.instance_id = padded("i", i, 5);
  inst.text = "synthetic post number " + std::to_string(i);
  const double u = uniform01(rng);
  if (u < 0.3) inst.subsets.insert(SubsetTag::aae);
  else if (u < 0.6) inst.subsets.insert(SubsetTag::anti_black);
  else inst.subsets.insert(SubsetTag::vulgar);
  return inst;
}

}  // namespace

std::vector<Persona> personas(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Persona> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Theme& theme = kThemes[static_cast<std::size_t>(uniform_below(rng, kThemes.size()))];
    std::string desc = "A ";
    desc += pick(rng, kAdjectives);
    desc += ' ';
    desc += pick(rng, theme.roles);
    desc += " who ";
    desc += pick(rng, kVerbs);
    desc += ' ';
    const auto t1 = static_cast<std::size_t>(uniform_below(rng, theme.topics.size()));
    auto t2 = static_cast<std::size_t>(uniform_below(rng, theme.topics.size() - 1));
    if (t2 >= t1) ++t2;
    desc += theme.topics[t1];
    desc += " and ";
    desc += theme.topics[t2];
    out.push_back({padded("p", i, 6), std::move(desc)});
  }
  return out;
}

SingleLabelDataset single_label(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SingleLabelDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst = make_instance(i, rng);
    // A latent level per post, six noisy ratings around it.
    const double level = 1.0 + 4.0 * uniform01(rng);
    std::vector<int> ratings;
    for (int a = 0; a < 6; ++a) {
      const long r = std::lround(level + 0.8 * standard_normal(rng));
      ratings.push_back(static_cast<int>(std::clamp(r, 1L, 5L)));
    }
    double sum = 0;
    for (int r : ratings) sum += r;
    inst.human_mean = sum / 6.0;
    ds.instances.push_back({std::move(inst), binarize(ratings)});
  }
  return ds;
}

SingleLabelDataset single_label_with_means(std::size_t n, double lo, double hi,
                                           std::uint64_t seed) {
  Rng rng(seed);
  SingleLabelDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst = make_instance(i, rng);
    const double m = lo + (hi - lo) * uniform01(rng);
    inst.human_mean = m;
    ds.instances.push_back({std::move(inst), m > 2.5 ? BinaryLabel::toxic : BinaryLabel::not_toxic});
  }
  return ds;
}

MultiLabelDataset multi_label(std::size_t num_instances, std::size_t num_annotators,
                              std::uint64_t seed) {
  Rng rng(seed);
  MultiLabelDataset ds;
  std::vector<double> levels;
  for (std::size_t i = 0; i < num_instances; ++i) {
    Instance inst = make_instance(i, rng);
    inst.instance_id = padded("m", i, 3);
    inst.text = "multi-label post number " + std::to_string(i);
    ds.instances.push_back(std::move(inst));
    levels.push_back(1.5 + 3.0 * uniform01(rng));
  }
  for (std::size_t a = 0; a < num_annotators; ++a) {
    ds.annotator_ids.push_back(padded("w", a, 4));
    const double leniency = 0.7 * standard_normal(rng);
    std::vector<std::optional<int>> row;
    for (std::size_t i = 0; i < num_instances; ++i) {
      const long r = std::lround(levels[i] + leniency + 0.6 * standard_normal(rng));
      row.emplace_back(static_cast<int>(std::clamp(r, 1L, 5L)));
    }
    ds.ratings.push_back(std::move(row));
  }
  return ds;
}

std::vector<PersonaTemplate> templates(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PersonaTemplate> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Theme& theme = kThemes[static_cast<std::size_t>(uniform_below(rng, kThemes.size()))];
    std::string desc;
    if (i % 3 == 2) {
      desc = "An internationally recognized [TOKEN] ";
      desc += pick(rng, theme.roles);
      desc += " who ";
    } else {
      desc = "[ATOKEN] ";
      desc += pick(rng, theme.roles);
      desc += " who ";
    }
    desc += pick(rng, kVerbs);
    desc += ' ';
    desc += pick(rng, theme.topics);
    out.push_back({padded("t", i, 4), std::move(desc)});
  }
  return out;
}

}  // namespace pcrowd::synthetic

#include "ser/synth.hpp"

#include <stdexcept>

#include "json.hpp"
#include "ser/rng.hpp"

namespace ser {

using nlohmann::json;

namespace {

std::string entity_link(const std::string& name) {
  return "http://dbpedia.org/resource/" + name;
}

EventTriplet make_event(const std::string& subject, const std::string& action,
                        const std::string& object, const std::string& date) {
  EventTriplet ev;
  ev.subject = subject;
  ev.subject_link = entity_link(subject);
  ev.action = action;
  ev.object = object;
  ev.object_link = entity_link(object);
  ev.context = subject + " " + action + " " + object + " reported on " + date;
  return ev;
}

}  // namespace

SynthData synth_generate(const SynthSpec& spec) {
  if (spec.stocks < 1 || spec.periods < 1 || spec.entity_vocab < 2 || spec.action_vocab < 1)
    throw std::invalid_argument("synth_generate: bad spec sizes");
  if (spec.events_min < 0 || spec.events_max < spec.events_min)
    throw std::invalid_argument("synth_generate: bad event count range");

  Rng event_rng(derive_seed(spec.seed, "synth:events"));
  Rng noise_rng(derive_seed(spec.seed, "synth:noise"));
  Rng plant_rng(derive_seed(spec.seed, "synth:planted"));

  std::vector<Date> calendar = make_weekday_calendar(spec.start, spec.periods + 1);

  SynthData out;
  for (int t = 0; t < spec.periods; ++t) {
    const std::string date_str = calendar[static_cast<std::size_t>(t)].to_string();
    for (int s = 0; s < spec.stocks; ++s) {
      RawObservationRow row;
      row.stock_id = 1000 + s;
      row.date = calendar[static_cast<std::size_t>(t)];

      int count = spec.events_min +
                  static_cast<int>(event_rng.uniform_index(
                      static_cast<uint64_t>(spec.events_max - spec.events_min + 1)));
      for (int e = 0; e < count; ++e) {
        std::string subj = "Entity_" + std::to_string(event_rng.uniform_index(
                                           static_cast<uint64_t>(spec.entity_vocab)));
        std::string act =
            "act" + std::to_string(event_rng.uniform_index(static_cast<uint64_t>(spec.action_vocab)));
        std::string obj = "Entity_" + std::to_string(event_rng.uniform_index(
                                          static_cast<uint64_t>(spec.entity_vocab)));
        row.events.push_back(make_event(subj, act, obj, date_str));
      }

      double effect_sum = 0.0;
      for (const PlantedEvent& p : spec.planted) {
        if (plant_rng.uniform01() < p.prob) {
          row.events.push_back(make_event(p.subject, p.action, p.object, date_str));
          effect_sum += p.effect;
        }
      }

      double target = effect_sum + noise_rng.normal(0.0, spec.noise_sd);
      row.target_return = target;
      out.returns.push_back({calendar[static_cast<std::size_t>(t + 1)], row.stock_id, target});
      out.events.push_back(std::move(row));
    }
  }

  // Seed the first trading day with pure-noise returns so the return calendar
  // covers every date the panel references.
  for (int s = 0; s < spec.stocks; ++s)
    out.returns.push_back({calendar[0], 1000 + s, noise_rng.normal(0.0, spec.noise_sd)});

  json manifest;
  manifest["stocks"] = spec.stocks;
  manifest["periods"] = spec.periods;
  manifest["entity_vocab"] = spec.entity_vocab;
  manifest["action_vocab"] = spec.action_vocab;
  manifest["noise_sd"] = spec.noise_sd;
  manifest["seed"] = spec.seed;
  manifest["calendar_start"] = calendar.front().to_string();
  manifest["calendar_end"] = calendar.back().to_string();
  json planted = json::array();
  for (const PlantedEvent& p : spec.planted) {
    planted.push_back(json{{"subject", p.subject},
                           {"action", p.action},
                           {"object", p.object},
                           {"effect", p.effect},
                           {"prob", p.prob}});
  }
  manifest["planted"] = std::move(planted);
  out.manifest_json = manifest.dump(2) + "\n";
  return out;
}

}  // namespace ser

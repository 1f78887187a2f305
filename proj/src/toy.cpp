#include "icda/toy.hpp"

#include <filesystem>
#include <numeric>

#include "icda/rng.hpp"

namespace icda {

namespace {

struct IntentTemplate {
  const char* name;
  std::vector<const char*> verbs;
  std::vector<const char*> objects;
  std::vector<const char*> contexts;
};

// Three deliberately confusable pairs share object vocabulary:
// exchange_rate/currency_support, card_lost/card_arrival,
// freeze_account/close_account.
const std::vector<IntentTemplate>& intent_templates() {
  static const std::vector<IntentTemplate> templates = {
      {"check_balance",
       {"show me", "what is", "tell me", "check"},
       {"my account balance", "the balance", "my available funds", "my current balance"},
       {"please", "right now", "on my checking account", "for my savings", "today"}},
      {"transfer_money",
       {"send", "transfer", "move", "wire"},
       {"money", "a hundred dollars", "some funds", "a payment"},
       {"to my friend", "to another account", "to my savings", "abroad", "tomorrow"}},
      {"exchange_rate",
       {"what is", "tell me", "show me", "check"},
       {"the exchange rate", "the euro rate", "the conversion rate", "the currency rate"},
       {"for euros", "for pounds", "for yen", "today", "right now"}},
      {"currency_support",
       {"do you support", "can i use", "do you accept", "can i hold"},
       {"the exchange rate", "the euro rate", "foreign currency", "the currency rate"},
       {"for euros", "for pounds", "in this app", "on my card", "at all"}},
      {"card_lost",
       {"i lost", "someone stole", "i cannot find", "i misplaced"},
       {"my card", "my debit card", "my credit card", "my new card"},
       {"yesterday", "at the store", "please block it", "what should i do", "help me"}},
      {"card_arrival",
       {"when will i get", "how long until i get", "track", "where is"},
       {"my card", "my debit card", "my replacement card", "my new card"},
       {"in the mail", "it was ordered last week", "please check delivery", "for my account",
        "help me"}},
      {"freeze_account",
       {"please freeze", "lock", "suspend", "put a hold on"},
       {"my account", "my checking account", "my savings account", "this account"},
       {"immediately", "for now", "until i call back", "temporarily", "today"}},
      {"close_account",
       {"please close", "terminate", "shut down", "cancel"},
       {"my account", "my checking account", "my savings account", "this account"},
       {"permanently", "for good", "next week", "and send my balance", "today"}},
      {"loan_apply",
       {"i want to apply for", "how do i get", "can i request", "help me apply for"},
       {"a loan", "a personal loan", "a small loan", "a car loan"},
       {"online", "with low interest", "this month", "through the app", "quickly"}},
      {"atm_locator",
       {"where is", "find", "locate", "show me"},
       {"the nearest atm", "an atm", "a cash machine", "the closest atm"},
       {"near me", "downtown", "that takes deposits", "open now", "around here"}},
      {"direct_deposit",
       {"how do i set up", "enable", "configure", "start"},
       {"direct deposit", "my paycheck deposit", "automatic deposit", "salary deposit"},
       {"with my employer", "for my account", "every month", "from my job", "please"}},
      {"reset_password",
       {"i forgot", "reset", "i need to change", "recover"},
       {"my password", "my login password", "my pin", "my online banking password"},
       {"for the app", "for online banking", "right away", "again", "please"}},
  };
  return templates;
}

constexpr size_t kPerIntent = 40;
constexpr size_t kTrainPerIntent = 24;
constexpr size_t kValidationPerIntent = 8;
constexpr uint64_t kCorpusSeed = 0x1cda;

}  // namespace

Dataset make_toy_corpus() {
  Dataset ds;
  std::vector<std::string> labels;
  for (const auto& tmpl : intent_templates()) {
    labels.emplace_back(tmpl.name);

    std::vector<std::string> utterances;
    for (const char* verb : tmpl.verbs) {
      for (const char* object : tmpl.objects) {
        for (const char* context : tmpl.contexts) {
          utterances.push_back(std::string(verb) + " " + object + " " + context);
        }
      }
    }
    SplitMix64 rng(derive_seed(kCorpusSeed, std::string("toy:") + tmpl.name));
    shuffle(utterances, rng);
    utterances.resize(kPerIntent);

    for (size_t i = 0; i < kPerIntent; ++i) {
      LabeledExample ex;
      ex.text = utterances[i];
      ex.label = tmpl.name;
      ex.provenance = Provenance::kSeed;
      if (i < kTrainPerIntent) {
        ds.train.push_back(std::move(ex));
      } else if (i < kTrainPerIntent + kValidationPerIntent) {
        ds.validation.push_back(std::move(ex));
      } else {
        ds.test.push_back(std::move(ex));
      }
    }
  }
  std::sort(labels.begin(), labels.end());
  ds.vocabulary = LabelVocabulary(labels);
  return ds;
}

void write_toy_corpus(const std::string& dir) {
  std::filesystem::create_directories(dir);
  Dataset ds = make_toy_corpus();
  namespace fs = std::filesystem;
  save_jsonl((fs::path(dir) / "train.jsonl").string(), ds.train);
  save_jsonl((fs::path(dir) / "validation.jsonl").string(), ds.validation);
  save_jsonl((fs::path(dir) / "test.jsonl").string(), ds.test);
}

}  // namespace icda

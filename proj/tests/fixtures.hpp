#pragma once

#include <string>

#include "vhda/corpus.hpp"

namespace vhda::testing {

// Seven-turn restaurant-search exhibit: a user narrowing down to a cheap
// restaurant in the north with no food preference, asking for the phone
// number. Four user turns carry accumulated goals.
inline std::string interpolation_dialog_json() {
    return R"JSON(
{
  "speakers": ["user", "wizard"],
  "dialogs": [
    {
      "id": "interp",
      "turns": [
        {
          "speaker": "user",
          "utterance": "i want to find a cheap restaurant in the north part of town .",
          "goal": ["inform(area=north)", "inform(price range=cheap)"],
          "state": ["inform(area=north)", "inform(price range=cheap)"]
        },
        {
          "speaker": "wizard",
          "utterance": "what food type are you looking for ?",
          "state": ["request(slot=food)"]
        },
        {
          "speaker": "user",
          "utterance": "any type of restaurant will be fine .",
          "goal": ["inform(area=north)", "inform(food=dontcare)", "inform(price range=cheap)"],
          "state": ["inform(food=dontcare)"]
        },
        {
          "speaker": "wizard",
          "utterance": "the <place> is a cheap indian restaurant in the north . would you like more information ?"
        },
        {
          "speaker": "user",
          "utterance": "what is the number ?",
          "goal": ["inform(area=north)", "inform(food=dontcare)", "inform(price range=cheap)"],
          "state": ["request(slot=phone)"]
        },
        {
          "speaker": "wizard",
          "utterance": "<place> 's phone number is <number> . is there anything else i can help you with ?"
        },
        {
          "speaker": "user",
          "utterance": "no thank you . goodbye .",
          "goal": ["inform(area=north)", "inform(food=dontcare)", "inform(price range=cheap)"]
        }
      ]
    }
  ]
}
)JSON";
}

inline DialogCorpus interpolation_corpus() {
    return parse_corpus_json(json::parse(interpolation_dialog_json()));
}

}  // namespace vhda::testing

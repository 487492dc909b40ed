// Copyright 2026 The advdetect Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scripted classifier speaking the gateway line protocol.
//
//   mock_backend echo            always (1,2,3,4,5)
//   mock_backend bright          (1,2,3,4,5) for mean intensity >= 0.5, else (6,7,8,9,0)
//   mock_backend small           handshake with K = 5
//   mock_backend die             handshake, then exit on the first request
//   mock_backend garbage         replies that are not JSON
//   mock_backend wrong-id        replies under another request id
//   mock_backend duplicate       repeats a label in the reply

#include <iostream>
#include <string>

#include "advdetect/classifier.hpp"

using namespace advdetect;

namespace {

class Scripted final : public Classifier {
 public:
  explicit Scripted(bool by_brightness) : by_brightness_(by_brightness) {}
  const std::string& id() const override { return id_; }
  int num_labels() const override { return 10; }
  std::string input_contract() const override { return "any"; }
  Top5 classify_top5(const Image& img) const override {
    Top5 t;
    const bool bright = !by_brightness_ || img.pixels().mean() >= 0.5;
    for (int k = 0; k < kTopK; ++k) {
      t.labels[k] = bright ? k + 1 : (k + 6) % 10;
      t.confidences[k] = 0.3 - 0.05 * k;
    }
    return t;
  }

 private:
  bool by_brightness_;
  std::string id_ = "mock";
};

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  if (mode == "echo" || mode == "bright") {
    Scripted backend(mode == "bright");
    serve_protocol(backend, std::cin, std::cout);
    return 0;
  }
  std::cout << encode_handshake({kProtocolVersion, mode == "small" ? 5 : 10, "mock-" + mode}) << std::endl;
  std::string line;
  while (std::getline(std::cin, line)) {
    const auto [id, img] = parse_request(line);
    if (mode == "die") return 1;
    if (mode == "garbage") {
      std::cout << "not json" << std::endl;
    } else if (mode == "wrong-id") {
      std::cout << R"({"id":)" << id + 7 << R"(,"labels":[1,2,3,4,5],"confidences":[0.5,0.2,0.1,0.1,0.1]})"
                << std::endl;
    } else if (mode == "duplicate") {
      std::cout << R"({"id":)" << id << R"(,"labels":[1,1,3,4,5],"confidences":[0.5,0.2,0.1,0.1,0.1]})" << std::endl;
    } else {
      Top5 t;
      t.labels = {1, 2, 3, 4, 5};
      t.confidences = {0.5, 0.2, 0.1, 0.1, 0.1};
      std::cout << encode_reply(id, t) << std::endl;
    }
  }
  return 0;
}

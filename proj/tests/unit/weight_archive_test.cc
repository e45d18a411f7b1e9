/* Copyright 2026 The DMA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <gtest/gtest.h>

#include <fstream>

#include "dmanet/lattice.h"
#include "dmanet/weight_archive.h"
#include "test_support.h"

namespace dmanet {
namespace {

WeightArchive Sample(testing_support::Rng& rng) {
  WeightArchive a;
  a.metadata["model.num_classes"] = "4";
  a.metadata["note"] = "";
  a.arrays["x.weight"] = testing_support::RandomTensor({2, 3, 1, 1}, rng);
  a.arrays["x.bias"] = testing_support::RandomTensor({2}, rng);
  a.arrays["empty"] = Tensor(Shape{0});
  return a;
}

TEST(WeightArchiveTest, Float64RoundTripIsExact) {
  testing_support::Rng rng(1);
  const WeightArchive a = Sample(rng);
  const std::string path = testing_support::MakeTempDir("archive") + "/a.dmaw";
  WriteArchive(path, a, DType::kFloat64);
  const WeightArchive b = ReadArchive(path);
  EXPECT_EQ(b.metadata, a.metadata);
  ASSERT_EQ(b.arrays.size(), a.arrays.size());
  for (const auto& [name, t] : a.arrays) {
    EXPECT_EQ(b.arrays.at(name).shape(), t.shape()) << name;
    for (std::int64_t i = 0; i < t.size(); ++i) EXPECT_EQ(b.arrays.at(name)[i], t[i]);
  }
}

TEST(WeightArchiveTest, Float32RoundsEachValue) {
  testing_support::Rng rng(2);
  const WeightArchive a = Sample(rng);
  const std::string path = testing_support::MakeTempDir("archive") + "/a.dmaw";
  WriteArchive(path, a, DType::kFloat32);
  const WeightArchive b = ReadArchive(path);
  const Tensor& t = a.arrays.at("x.weight");
  for (std::int64_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(b.arrays.at("x.weight")[i], static_cast<double>(static_cast<float>(t[i])));
  }
}

TEST(WeightArchiveTest, ImportReportsMissingNamesAndShapes) {
  Rng init(3);
  CbrParams cbr = MakeCbr(2, 3, 3, 1, init);
  WeightArchive a = ExportArchive(cbr);
  a.arrays.erase("bn.running_var");
  try {
    ImportArchive(cbr, a);
    ADD_FAILURE() << "missing array accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("bn.running_var"), std::string::npos) << e.what();
  }
  a = ExportArchive(cbr);
  a.arrays["conv.weight"] = Tensor(Shape{3, 2, 1, 1});
  try {
    ImportArchive(cbr, a);
    ADD_FAILURE() << "wrong shape accepted";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(3,2,1,1)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(3,2,3,3)"), std::string::npos) << msg;
  }
}

TEST(WeightArchiveTest, FailedImportLeavesGroupUntouched) {
  Rng init(4);
  CbrParams cbr = MakeCbr(2, 3, 3, 1, init);
  const Tensor before = cbr.conv.weight.value();
  WeightArchive a = ExportArchive(cbr);
  a.arrays["conv.weight"].Fill(9.0);
  a.arrays["bn.weight"] = Tensor(Shape{4});
  EXPECT_THROW(ImportArchive(cbr, a), ShapeError);
  EXPECT_EQ(cbr.conv.weight.value()[0], before[0]);
}

TEST(WeightArchiveTest, UnknownKeysAreReturned) {
  Rng init(5);
  CbrParams cbr = MakeCbr(2, 3, 1, 1, init);
  WeightArchive a = ExportArchive(cbr);
  a.arrays["extra"] = Tensor(Shape{1});
  EXPECT_EQ(ImportArchive(cbr, a), std::vector<std::string>{"extra"});
}

TEST(WeightArchiveTest, CorruptFilesRaiseIoError) {
  const std::string dir = testing_support::MakeTempDir("archive");
  std::ofstream(dir + "/bad.dmaw") << "DMAWjunk";
  EXPECT_THROW(ReadArchive(dir + "/bad.dmaw"), IoError);
  EXPECT_THROW(ReadArchive(dir + "/absent.dmaw"), IoError);

  testing_support::Rng rng(6);
  WriteArchive(dir + "/ok.dmaw", Sample(rng), DType::kFloat64);
  std::ifstream in(dir + "/ok.dmaw", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream(dir + "/cut.dmaw", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  EXPECT_THROW(ReadArchive(dir + "/cut.dmaw"), IoError);
}

}  // namespace
}  // namespace dmanet

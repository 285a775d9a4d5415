#include <gtest/gtest.h>

#include "support.hpp"
#include "vsel/records.hpp"

using namespace vsel;

namespace {

void expect_format_error(const std::function<void()>& fn, const std::string& needle) {
  try {
    fn();
    FAIL() << "expected FormatError mentioning '" << needle << "'";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Csv, PatchRatings) {
  const auto rows = parse_patch_ratings(
      "\xEF\xBB\xBFimage_id,grid_row,grid_col,participant_id,rating\r\n"
      "a,0,11,p1,6\r\n"
      "\n"
      "b, 3 ,4,p2,1\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].grid_col, 11);
  EXPECT_EQ(rows[1].image_id, "b");
  EXPECT_EQ(rows[1].grid_row, 3);
  const std::string head = "image_id,grid_row,grid_col,participant_id,rating\n";
  expect_format_error([&] { parse_patch_ratings(head + "a,0,0,p,1\na,0,0,p,7\n"); }, "row 2");
  expect_format_error([&] { parse_patch_ratings(head + "a,12,0,p,1\n"); }, "12 x 12");
  expect_format_error([&] { parse_patch_ratings(head + "a,0,0,p,2.5\n"); }, "integer");
  expect_format_error([&] { parse_patch_ratings(head + "a,0,0,p\n"); }, "row 1");
  expect_format_error([&] { parse_patch_ratings("image_id,grid_row\n"); }, "grid_col");
  expect_format_error([&] { parse_patch_ratings(""); }, "empty");
}

TEST(Csv, ColumnOrderIsFree) {
  const auto rows = parse_fixations("x,y,task,image_id\n1.5,2,object,img\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].task, FixationTask::Object);
  EXPECT_EQ(rows[0].x, 1.5);
  expect_format_error([&] { parse_fixations("image_id,task,x,y\nimg,gaze,1,1\n"); }, "task");
  expect_format_error([&] { parse_fixations("image_id,task,x,y\nimg,free,-1,1\n"); }, "outside");
}

TEST(Csv, QuotedFields) {
  const auto rows = parse_recognition(
      "image_id,condition,selected_label_set,true_label_set,participant_id\n"
      "\"a,b\",correct,\"dog, cat\",dog,p1\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].image_id, "a,b");
  EXPECT_EQ(rows[0].selected_label_set, "dog, cat");
}

TEST(Csv, DiscriminationAndChains) {
  const auto d = parse_discrimination(
      "image_id,x,y,condition,response,participant_id\nimg,7,14,shifted,same,p\n");
  EXPECT_EQ(d.at(0).condition, Judgement::Shifted);
  EXPECT_EQ(d.at(0).response, Judgement::Same);
  expect_format_error(
      [] { parse_discrimination("image_id,x,y,condition,response,participant_id\nimg,7,14,moved,same,p\n"); },
      "same|shifted");
  const std::string head = "image_id,chain_id,iteration,x,y\n";
  EXPECT_EQ(parse_chains(head + "i,c,0,1,1\ni,c,20,3,4\n").size(), 2u);
  expect_format_error([&] { parse_chains(head + "i,c,21,1,1\n"); }, "0..20");
  expect_format_error([&] { parse_chains(head + "i,c,3,1,1\ni,c,3,2,2\n"); }, "duplicate");
}

TEST(Csv, DatasetRoundTrip) {
  HumanDataset data;
  data.ratings = {{"a", 1, 2, "p", 5}};
  data.discrimination = {{"a", 3.5, 7, Judgement::Same, Judgement::Shifted, "p"}};
  data.chains = {{"a", "c1", 20, 10.25, 11}};
  data.fixations = {{"a", FixationTask::Saliency, 1, 2}};
  const auto dir = testkit::scratch_dir("records");
  write_human_dataset(dir, data);
  const HumanDataset back = read_human_dataset(dir);
  EXPECT_EQ(patch_ratings_csv(back.ratings), patch_ratings_csv(data.ratings));
  EXPECT_EQ(discrimination_csv(back.discrimination), discrimination_csv(data.discrimination));
  EXPECT_EQ(chains_csv(back.chains), chains_csv(data.chains));
  EXPECT_EQ(fixations_csv(back.fixations), fixations_csv(data.fixations));
  std::filesystem::remove_all(dir);
}

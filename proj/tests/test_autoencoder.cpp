#include <gtest/gtest.h>

#include <sstream>

#include "conjointnet/autoencoder.hpp"
#include "conjointnet/dataio/synth.hpp"
#include "test_util.hpp"

using namespace conjointnet;
using conjointnet::testing::random_binary;

namespace {

AEConfig small_config(std::size_t in, AEVariant v, bool bn, ReconKind recon = ReconKind::BCE) {
  AEConfig c;
  c.input_dim = in;
  c.hidden_dims = {6};
  c.latent_dim = 2;
  c.variant = v;
  c.batch_norm = bn;
  c.recon = recon;
  return c;
}

double ae_grad_error(AutoEncoder& ae, const Matrix& x, Rng& rng) {
  auto params = ae.parameters();
  // Zero biases put an all-dead row exactly on a ReLU kink.
  for (auto* p : params)
    if (p->name == "bias") p->value = conjointnet::testing::random_matrix(p->value.rows(), p->value.cols(), rng, -0.1, 0.1);
  return grad_check(params, [&](bool acc) {
    Rng noise(99);  // same epsilon on every evaluation
    return ae.objective(x, noise, acc);
  });
}

}  // namespace

TEST(AEConfig, Validation) {
  AEConfig c;
  EXPECT_THROW(c.validate(), ValidationError);
  c.input_dim = 2;
  EXPECT_THROW(c.validate(), ValidationError);  // latent must be < input
  c.input_dim = 10;
  c.blocks = {5, 4};
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(AutoEncoder, ShapesAndSymmetry) {
  Rng rng(1);
  AEConfig c;
  c.input_dim = 276;
  c.hidden_dims = {128, 32};
  AutoEncoder ae(c, rng);
  auto dec = ae.decoder_widths();
  auto enc = ae.encoder_widths();
  std::reverse(enc.begin(), enc.end());
  EXPECT_EQ(dec, enc);
  const Matrix x = random_binary(5, 276, rng);
  EXPECT_EQ(ae.encode(x).z.cols(), 2u);
  const Matrix r = ae.decode(ae.encode(x).z);
  EXPECT_EQ(r.rows(), 5u);
  EXPECT_EQ(r.cols(), 276u);
  for (double v : r.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(ae.encode(Matrix(1, 275)), ShapeError);
  EXPECT_THROW(ae.decode(Matrix(1, 3)), ShapeError);
}

TEST(AutoEncoder, InferEncodeIsDeterministic) {
  Rng rng(2);
  AutoEncoder ae(small_config(12, AEVariant::VAE, true), rng);
  const Matrix x = random_binary(4, 12, rng);
  EXPECT_EQ(ae.encode(x).z, ae.encode(x).z);
  EXPECT_EQ(ae.encode(x).z, ae.encode(x).mu);
}

TEST(AutoEncoder, VaeSamplingCollapsesToMuForTinyVariance) {
  Rng rng(3);
  AutoEncoder ae(small_config(12, AEVariant::VAE, false), rng);
  const Matrix x = random_binary(4, 12, rng);
  Rng noise(5);
  // Push logvar to -30 by zeroing the head weights and setting the bias.
  nlohmann::json j = ae.to_json();
  for (auto& v : j["logvar_head"]["layers"][0]["weight"]["data"]) v = 0.0;
  for (auto& v : j["logvar_head"]["layers"][0]["bias_value"]["data"]) v = -30.0;
  AutoEncoder forced = AutoEncoder::from_json(j);
  const LatentCode code = forced.encode(x, Mode::Train, &noise);
  for (std::size_t i = 0; i < code.z.size(); ++i) EXPECT_NEAR(code.z.data()[i], code.mu.data()[i], 1e-6);
}

TEST(AutoEncoder, VaeTrainModeNeedsNoiseSource) {
  Rng rng(4);
  AutoEncoder ae(small_config(8, AEVariant::VAE, false), rng);
  EXPECT_THROW(ae.encode(Matrix(2, 8), Mode::Train, nullptr), ProtocolError);
}

TEST(AutoEncoder, VaeSamplingReproducibleWithSeed) {
  Rng rng(5);
  AutoEncoder ae(small_config(10, AEVariant::VAE, true), rng);
  const Matrix x = random_binary(6, 10, rng);
  AutoEncoder a = ae, b = ae;
  Rng n1(7), n2(7);
  EXPECT_EQ(a.encode(x, Mode::Train, &n1).z, b.encode(x, Mode::Train, &n2).z);
}

TEST(AutoEncoder, GradCheckAllVariants) {
  Rng rng(6);
  for (AEVariant v : {AEVariant::AE, AEVariant::VAE})
    for (bool bn : {false, true})
      for (ReconKind recon : {ReconKind::BCE, ReconKind::L2}) {
        AutoEncoder ae(small_config(9, v, bn, recon), rng);
        const Matrix x = random_binary(7, 9, rng);
        EXPECT_LT(ae_grad_error(ae, x, rng), bn ? 1e-3 : 1e-4)
            << to_string(v) << " bn=" << bn << " recon=" << to_string(recon);
      }
}

TEST(AutoEncoder, KlIsNonNegative) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const Matrix mu = conjointnet::testing::random_matrix(4, 3, rng, -3, 3);
    const Matrix lv = conjointnet::testing::random_matrix(4, 3, rng, -5, 5);
    EXPECT_GE(kl_standard_normal(mu, lv).loss, 0.0);
  }
}

TEST(TrainAE, SinglePointDatasetIsMemorized) {
  Rng rng(8);
  const auto s = uniform_schema(4, 3);
  const auto item = random_item(s, rng);
  Matrix data(64, s.width());
  for (std::size_t r = 0; r < 64; ++r) item.write_one_hot(s, data.row(r));
  AEConfig c = small_config(s.width(), AEVariant::AE, false);
  c.blocks = s.level_counts();
  AutoEncoder ae(c, rng);
  AETrainConfig tc;
  tc.train.max_epochs = 100;
  tc.train.batch_size = 16;
  tc.train.optimizer.learning_rate = 1e-2;
  tc.train.seed = 3;
  train_ae(ae, data, tc);
  EXPECT_LT(recon_loss(data, ae.reconstruct(data), ReconKind::L2).loss, 1e-3);
  EXPECT_EQ(reconstruction_accuracy(data, ae.reconstruct(data), c.blocks), 1.0);
  for (const auto& row : reconstruction_dump(ae, s, item)) EXPECT_LT(std::abs(row.original - row.reconstructed), 0.05);
}

TEST(TrainAE, ClusteredDataReconstructsHeldOut) {
  const auto s = uniform_schema(25, 4);
  const auto data = synth_clustered(s, 4, 1200, 0.0, 11);
  const auto idx = all_indices(data.dataset);
  const Matrix x = item_matrix(data.dataset, idx);
  const Matrix train = slice_rows(x, 0, 1000), test = slice_rows(x, 1000, 200);
  Rng rng(12);
  AEConfig c;
  c.input_dim = s.width();
  c.hidden_dims = {32};
  c.blocks = s.level_counts();
  AutoEncoder ae(c, rng);
  AETrainConfig tc;
  tc.train.max_epochs = 30;
  tc.train.batch_size = 32;
  tc.train.optimizer.learning_rate = 5e-3;
  tc.train.seed = 13;
  const auto report = train_ae(ae, train, tc);
  EXPECT_EQ(report.history.size(), 30u);
  EXPECT_EQ(report.selection, "val_loss");
  EXPECT_GE(reconstruction_accuracy(test, ae.reconstruct(test), c.blocks), 0.95);
}

TEST(TrainAE, VaeWithoutKlTracksPlainAE) {
  const auto s = uniform_schema(10, 3);
  const auto data = synth_clustered(s, 3, 600, 0.05, 21);
  const Matrix x = item_matrix(data.dataset, all_indices(data.dataset));
  AETrainConfig tc;
  tc.train.max_epochs = 30;
  tc.train.batch_size = 32;
  tc.train.optimizer.learning_rate = 5e-3;
  tc.train.seed = 4;
  AEConfig c;
  c.input_dim = s.width();
  c.hidden_dims = {16};
  Rng r1(22), r2(22);
  AutoEncoder ae(c, r1);
  c.variant = AEVariant::VAE;
  c.kl_weight = 0.0;
  AutoEncoder vae(c, r2);
  train_ae(ae, x, tc);
  train_ae(vae, x, tc);
  const double la = ae.eval_loss(x), lv = vae.eval_loss(x);
  EXPECT_NEAR(lv, la, 0.1 * la);
}

TEST(TrainAE, DeterministicGivenSeed) {
  const auto s = uniform_schema(5, 3);
  const auto data = synth_clustered(s, 2, 200, 0.1, 31);
  const Matrix x = item_matrix(data.dataset, all_indices(data.dataset));
  AEConfig c = small_config(s.width(), AEVariant::VAE, true);
  AETrainConfig tc;
  tc.train.max_epochs = 5;
  tc.train.seed = 9;
  Rng r1(1), r2(1);
  AutoEncoder a(c, r1), b(c, r2);
  train_ae(a, x, tc);
  train_ae(b, x, tc);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Reconstruction, DumpOfUntrainedModel) {
  Rng rng(9);
  const auto s = uniform_schema(3, 4);
  AEConfig c = small_config(s.width(), AEVariant::AE, true);
  AutoEncoder ae(c, rng);
  const auto rows = reconstruction_dump(ae, s, random_item(s, rng));
  ASSERT_EQ(rows.size(), s.width());
  for (const auto& r : rows) {
    EXPECT_GT(r.reconstructed, 0.0);
    EXPECT_LT(r.reconstructed, 1.0);
  }
  std::ostringstream os;
  write_reconstruction_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "dim_index,attribute,level,original,reconstructed");
}

TEST(AutoEncoder, JsonRoundTrip) {
  Rng rng(10);
  AutoEncoder ae(small_config(10, AEVariant::VAE, true), rng);
  const Matrix x = random_binary(3, 10, rng);
  const AutoEncoder back = AutoEncoder::from_json(nlohmann::json::parse(ae.to_json().dump()));
  EXPECT_EQ(back.reconstruct(x), ae.reconstruct(x));
  EXPECT_EQ(back.embedding().infer(x), ae.encode(x).z);
}

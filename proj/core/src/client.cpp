#include "fedsim/client.hpp"

#include "fedsim/error.hpp"

namespace fedsim {

TrainOptions train_options_from(const ConfigMap& config) {
  TrainOptions opt;
  const auto epochs = config.get_int(config_key::kLocalEpochs);
  const auto batch = config.get_int(config_key::kBatchSize);
  if (epochs < 0 || epochs > UINT32_MAX) {
    fail(ErrorCode::kValidationError, "local_epochs out of range");
  }
  if (batch < 1 || batch > UINT32_MAX) {
    fail(ErrorCode::kValidationError, "batch_size must be >= 1");
  }
  opt.epochs = static_cast<std::uint32_t>(epochs);
  opt.batch_size = static_cast<std::uint32_t>(batch);
  opt.learning_rate = config.get_double(config_key::kLearningRate);
  opt.seed = static_cast<std::uint64_t>(config.get_int(config_key::kSeed));
  return opt;
}

HeadClient::HeadClient(Shard shard, std::size_t num_classes, std::uint64_t init_seed)
    : shard_(std::move(shard)),
      model_(HeadModel::random(shard_.feature_dim(), num_classes, init_seed)) {
  for (auto y : shard_.labels) {
    if (y >= num_classes) {
      fail(ErrorCode::kLabelOutOfRange, "shard label " + std::to_string(y) +
                                            " with " + std::to_string(num_classes) +
                                            " classes");
    }
  }
}

FitResult HeadClient::fit_local(const Parameters& params, const ConfigMap& config,
                                const BatchGate& gate) {
  auto incoming = HeadModel::from_parameters(params);
  if (incoming.feature_dim != model_.feature_dim ||
      incoming.num_classes != model_.num_classes) {
    fail(ErrorCode::kShapeMismatch, "parameters do not match the local head");
  }
  const auto opt = train_options_from(config);
  model_ = std::move(incoming);

  FitResult out;
  if (opt.epochs > 0) {
    const auto stats = train_local(model_, shard_, opt, gate);
    out.num_examples = stats.sample_visits;
    out.completed_epochs = stats.completed_epochs;
  }
  out.parameters = model_.to_parameters();
  out.metrics.set(metric_key::kCompletedEpochs, out.completed_epochs);
  if (out.num_examples == 0) out.metrics.set(metric_key::kFailed, true);
  return out;
}

FitRes to_fit_res(FitResult result) {
  return FitRes{std::move(result.parameters), result.num_examples,
                std::move(result.metrics)};
}

FitRes HeadClient::fit(const FitIns& ins) {
  return to_fit_res(fit_local(ins.parameters, ins.config));
}

EvaluateRes HeadClient::evaluate(const EvaluateIns& ins) {
  const auto model = HeadModel::from_parameters(ins.parameters);
  const auto stats = evaluate_head(model, shard_);
  EvaluateRes res;
  res.loss = stats.loss;
  res.num_examples = stats.num_examples;
  res.metrics.set(metric_key::kAccuracy, stats.accuracy);
  return res;
}

void serve_client(ByteChannel& conn, Client& client) {
  while (true) {
    Message msg;
    try {
      msg = read_frame(conn);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConnectionClosed) return;
      throw;
    }
    if (std::holds_alternative<Disconnect>(msg)) return;
    if (std::holds_alternative<GetParametersIns>(msg)) {
      write_frame(conn, GetParametersRes{client.get_parameters()});
    } else if (const auto* fit = std::get_if<FitIns>(&msg)) {
      FitRes res;
      try {
        res = client.fit(*fit);
      } catch (const Error& e) {
        // Local failures are reported, not fatal to the connection.
        res = FitRes{fit->parameters, 0, {{metric_key::kFailed, true}, {"error", e.what()}}};
      }
      write_frame(conn, res);
    } else if (const auto* eval = std::get_if<EvaluateIns>(&msg)) {
      EvaluateRes res;
      try {
        res = client.evaluate(*eval);
      } catch (const Error& e) {
        res = EvaluateRes{0.0, 0, {{metric_key::kFailed, true}, {"error", e.what()}}};
      }
      write_frame(conn, res);
    } else {
      write_frame(conn, Disconnect{disconnect_reason::kProtocolViolation});
      fail(ErrorCode::kProtocolViolation,
           "client received " + std::string(message_name(msg)));
    }
  }
}

void run_client(const Endpoint& server, const std::string& client_id,
                const ConfigMap& capabilities, Client& client) {
  auto conn = tcp_connect(server);
  handshake_client(*conn, client_id, capabilities);
  serve_client(*conn, client);
  conn->close();
}

}  // namespace fedsim

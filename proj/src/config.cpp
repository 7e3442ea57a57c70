#include "epic/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "epic/csvio.hpp"

namespace epic {

TaskDistribution ExperimentConfig::make_stream() const {
  return TaskDistribution::by_name(env_name, H, discount);
}

RegularizerConfig ExperimentConfig::make_regularizer() const {
  RegularizerConfig cfg;
  cfg.N = N;
  cfg.H = H;
  cfg.K_so_far = 0;
  cfg.lambda0 = lambda0;
  cfg.alpha = alpha;
  cfg.s_min = s_min;
  cfg.r = r;
  cfg.delta_conf = delta_conf;
  cfg.gamma_exp = gamma_exp;
  cfg.reg_scale = kappa;
  return cfg;
}

TrainingConfig ExperimentConfig::make_training() const {
  TrainingConfig cfg;
  cfg.K = K;
  cfg.N = N;
  cfg.M = M;
  cfg.beta = beta;
  cfg.sigma_init = sigma_init;
  cfg.inner_steps = inner_steps;
  cfg.inner_batch = inner_batch;
  cfg.inner_beta = inner_beta;
  cfg.eval_rollouts = eval_rollouts;
  return cfg;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::runtime_error("config: seeds must be non-empty");
  if (algo != "epicg" && algo != "epicg_ft" && algo != "single_task")
    throw std::runtime_error("config: unknown algo " + algo);
  if (policy != "linear" && policy != "mlp")
    throw std::runtime_error("config: unknown policy " + policy);
  if (policy == "mlp" && hidden.empty())
    throw std::runtime_error("config: mlp policy needs at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw std::runtime_error("config: hidden layer sizes must be positive");
  TaskDistribution::by_name(env_name, H, discount);  // throws on unknown env
  if (K < 1 || N < 1 || M < 1) throw std::runtime_error("config: K, N, M must be positive");
  make_regularizer().validate();
}

namespace {

double parse_number(const std::string& value, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    while (used < value.size() && std::isspace(static_cast<unsigned char>(value[used]))) ++used;
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected a number, got '" + value + "'");
  }
}

int parse_int(const std::string& value, int line) {
  const double v = parse_number(value, line);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) throw ConfigError(line, "expected an integer, got '" + value + "'");
  return i;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& value, int line, Parse&& parse) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    const auto end = item.find_last_not_of(" \t");
    if (begin == std::string::npos) throw ConfigError(line, "empty list element");
    out.push_back(parse(item.substr(begin, end - begin + 1), line));
  }
  if (out.empty()) throw ConfigError(line, "empty list");
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      section = line.substr(1, line.size() - 2);
      if (section != "env" && section != "algo" && section != "run" && section != "sweep" &&
          section != "verify")
        throw ConfigError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "empty key");
    if (value.empty()) throw ConfigError(line_no, "empty value for key " + key);

    auto unknown = [&]() -> ConfigError {
      return ConfigError(line_no, "unknown key '" + key + "' in section [" + section + "]");
    };

    if (section == "env") {
      if (key == "name") cfg.env_name = value;
      else if (key == "H") cfg.H = parse_int(value, line_no);
      else if (key == "discount") cfg.discount = parse_number(value, line_no);
      else throw unknown();
    } else if (section == "algo") {
      if (key == "name") cfg.algo = value;
      else if (key == "policy") cfg.policy = value;
      else if (key == "hidden") cfg.hidden = parse_list<int>(value, line_no, parse_int);
      else if (key == "K") cfg.K = parse_int(value, line_no);
      else if (key == "N") cfg.N = parse_int(value, line_no);
      else if (key == "M") cfg.M = parse_int(value, line_no);
      else if (key == "beta") cfg.beta = parse_number(value, line_no);
      else if (key == "lambda0") cfg.lambda0 = parse_number(value, line_no);
      else if (key == "alpha") cfg.alpha = parse_number(value, line_no);
      else if (key == "kappa") cfg.kappa = parse_number(value, line_no);
      else if (key == "delta_conf") cfg.delta_conf = parse_number(value, line_no);
      else if (key == "gamma_exp") cfg.gamma_exp = parse_number(value, line_no);
      else if (key == "inner_steps") cfg.inner_steps = parse_int(value, line_no);
      else if (key == "inner_batch") cfg.inner_batch = parse_int(value, line_no);
      else if (key == "inner_beta") cfg.inner_beta = parse_number(value, line_no);
      else if (key == "eval_rollouts") cfg.eval_rollouts = parse_int(value, line_no);
      else if (key == "sigma_init") cfg.sigma_init = parse_number(value, line_no);
      else if (key == "s_min") cfg.s_min = parse_number(value, line_no);
      else if (key == "r") cfg.r = parse_number(value, line_no);
      else throw unknown();
    } else if (section == "run") {
      if (key == "seeds") {
        cfg.seeds = parse_list<std::uint64_t>(value, line_no, [](const std::string& v, int ln) {
          const int i = parse_int(v, ln);
          if (i < 0) throw ConfigError(ln, "seeds must be non-negative");
          return static_cast<std::uint64_t>(i);
        });
      } else if (key == "output_dir") {
        cfg.output_dir = value;
      } else {
        throw unknown();
      }
    } else if (section == "sweep") {
      if (key == "kappa") cfg.sweep_kappa = parse_list<double>(value, line_no, parse_number);
      else if (key == "N") cfg.sweep_N = parse_list<int>(value, line_no, parse_int);
      else if (key == "lambda0") cfg.sweep_lambda0 = parse_list<double>(value, line_no, parse_number);
      else throw unknown();
    } else if (section == "verify") {
      if (key == "traces") cfg.verify_traces = parse_int(value, line_no);
      else if (key == "trace_T") cfg.verify_T = parse_int(value, line_no);
      else if (key == "trace_N") cfg.verify_N = parse_int(value, line_no);
      else if (key == "delta") cfg.verify_delta = parse_number(value, line_no);
      else if (key == "holdout") cfg.holdout = parse_int(value, line_no);
      else throw unknown();
    } else {
      throw ConfigError(line_no, "key '" + key + "' outside any section");
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto num = [](double v) { return format_double(v); };
  out << "[env]\n";
  out << "name = " << cfg.env_name << "\n";
  out << "H = " << cfg.H << "\n";
  out << "discount = " << num(cfg.discount) << "\n\n";
  out << "[algo]\n";
  out << "name = " << cfg.algo << "\n";
  out << "policy = " << cfg.policy << "\n";
  out << "hidden = ";
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    if (i) out << ",";
    out << cfg.hidden[i];
  }
  out << "\n";
  out << "K = " << cfg.K << "\n";
  out << "N = " << cfg.N << "\n";
  out << "M = " << cfg.M << "\n";
  out << "beta = " << num(cfg.beta) << "\n";
  out << "lambda0 = " << num(cfg.lambda0) << "\n";
  out << "alpha = " << num(cfg.alpha) << "\n";
  out << "kappa = " << num(cfg.kappa) << "\n";
  out << "delta_conf = " << num(cfg.delta_conf) << "\n";
  out << "gamma_exp = " << num(cfg.gamma_exp) << "\n";
  out << "inner_steps = " << cfg.inner_steps << "\n";
  out << "inner_batch = " << cfg.inner_batch << "\n";
  out << "inner_beta = " << num(cfg.inner_beta) << "\n";
  out << "eval_rollouts = " << cfg.eval_rollouts << "\n";
  out << "sigma_init = " << num(cfg.sigma_init) << "\n";
  out << "s_min = " << num(cfg.s_min) << "\n";
  out << "r = " << num(cfg.r) << "\n\n";
  out << "[run]\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (i) out << ",";
    out << cfg.seeds[i];
  }
  out << "\n";
  out << "output_dir = " << cfg.output_dir << "\n\n";
  out << "[sweep]\n";
  auto list_num = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += num(v[i]);
    }
    return s;
  };
  out << "kappa = " << list_num(cfg.sweep_kappa) << "\n";
  out << "N = ";
  for (std::size_t i = 0; i < cfg.sweep_N.size(); ++i) {
    if (i) out << ",";
    out << cfg.sweep_N[i];
  }
  out << "\n";
  out << "lambda0 = " << list_num(cfg.sweep_lambda0) << "\n\n";
  out << "[verify]\n";
  out << "traces = " << cfg.verify_traces << "\n";
  out << "trace_T = " << cfg.verify_T << "\n";
  out << "trace_N = " << cfg.verify_N << "\n";
  out << "delta = " << num(cfg.verify_delta) << "\n";
  out << "holdout = " << cfg.holdout << "\n";
  return out.str();
}

}  // namespace epic

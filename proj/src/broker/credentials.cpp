#include "edgebench/broker/credentials.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <sstream>
#include <stdexcept>
#include <vector>

namespace edgebench::broker {

namespace {

std::string hex(const std::vector<unsigned char>& v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (unsigned char c : v) {
    s += kDigits[c >> 4];
    s += kDigits[c & 0xF];
  }
  return s;
}

std::vector<unsigned char> unhex(std::string_view s) {
  if (s.size() % 2) throw std::invalid_argument("odd hex length");
  std::vector<unsigned char> out;
  for (std::size_t i = 0; i < s.size(); i += 2) out.push_back(static_cast<unsigned char>(std::stoi(std::string(s.substr(i, 2)), nullptr, 16)));
  return out;
}

std::vector<unsigned char> derive(std::string_view password, const std::vector<unsigned char>& salt, int iterations) {
  std::vector<unsigned char> out(32);
  if (!PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(), static_cast<int>(salt.size()),
                         iterations, EVP_sha256(), static_cast<int>(out.size()), out.data()))
    throw std::runtime_error("PBKDF2 failed");
  return out;
}

}  // namespace

std::string hash_password(std::string_view password, int iterations) {
  std::vector<unsigned char> salt(16);
  if (RAND_bytes(salt.data(), static_cast<int>(salt.size())) != 1) throw std::runtime_error("RAND_bytes failed");
  return "pbkdf2-sha256$" + std::to_string(iterations) + "$" + hex(salt) + "$" + hex(derive(password, salt, iterations));
}

bool verify_password(std::string_view password, const std::string& encoded) {
  std::vector<std::string> parts;
  std::stringstream ss(encoded);
  for (std::string p; std::getline(ss, p, '$');) parts.push_back(p);
  if (parts.size() != 4 || parts[0] != "pbkdf2-sha256") return false;
  try {
    const int iterations = std::stoi(parts[1]);
    const auto salt = unhex(parts[2]);
    const auto expected = unhex(parts[3]);
    const auto got = derive(password, salt, iterations);
    return got.size() == expected.size() && CRYPTO_memcmp(got.data(), expected.data(), got.size()) == 0;
  } catch (const std::exception&) {
    return false;
  }
}

void CredentialStore::add_user(const std::string& user, std::string_view password) {
  users_[user] = hash_password(password);
}

void CredentialStore::add_hashed(const std::string& user, std::string encoded) { users_[user] = std::move(encoded); }

AuthResult CredentialStore::check(const std::optional<std::string>& user, const std::optional<Bytes>& password) const {
  if (!enabled()) return AuthResult::Ok;
  if (!user) return AuthResult::NotAuthorized;
  auto it = users_.find(*user);
  if (it == users_.end() || !password) return AuthResult::BadCredentials;
  const std::string_view pw(reinterpret_cast<const char*>(password->data()), password->size());
  return verify_password(pw, it->second) ? AuthResult::Ok : AuthResult::BadCredentials;
}

}  // namespace edgebench::broker

#include "adaqr/text.hpp"

#include <cctype>

namespace adaqr::text {

std::string lowercase(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

// Porter stemmer, transcribed from the classic algorithm description.
// Operates on a mutable buffer; `end` is the index of the last letter of the
// candidate stem while suffix rules are being matched.
struct Stemmer {
  std::string b;
  int end = 0;  // last letter of the stem under consideration
  int k = 0;    // last letter of the full (possibly trimmed) word

  bool is_consonant(int i) const {
    switch (b[static_cast<size_t>(i)]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !is_consonant(i - 1);
      default:
        return true;
    }
  }

  // Number of consonant-vowel sequences in [0, end].
  int measure() const {
    int n = 0;
    int i = 0;
    while (true) {
      if (i > end) return n;
      if (!is_consonant(i)) break;
      i++;
    }
    i++;
    while (true) {
      while (true) {
        if (i > end) return n;
        if (is_consonant(i)) break;
        i++;
      }
      i++;
      n++;
      while (true) {
        if (i > end) return n;
        if (!is_consonant(i)) break;
        i++;
      }
      i++;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= end; i++)
      if (!is_consonant(i)) return true;
    return false;
  }

  bool double_consonant(int i) const {
    if (i < 1) return false;
    if (b[static_cast<size_t>(i)] != b[static_cast<size_t>(i - 1)]) return false;
    return is_consonant(i);
  }

  // consonant-vowel-consonant ending at i, last consonant not w, x, or y
  bool cvc(int i) const {
    if (i < 2 || !is_consonant(i) || is_consonant(i - 1) || !is_consonant(i - 2))
      return false;
    char c = b[static_cast<size_t>(i)];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(const char* s) {
    size_t len = std::char_traits<char>::length(s);
    if (len > static_cast<size_t>(k) + 1) return false;
    if (b.compare(static_cast<size_t>(k) + 1 - len, len, s) != 0) return false;
    end = k - static_cast<int>(len);
    return true;
  }

  void set_to(const char* s) {
    size_t len = std::char_traits<char>::length(s);
    b.replace(static_cast<size_t>(end) + 1, b.size(), s);
    k = end + static_cast<int>(len);
  }

  void replace_if_measure(const char* s) {
    if (measure() > 0) set_to(s);
  }

  void step1ab() {
    if (b[static_cast<size_t>(k)] == 's') {
      if (ends("sses")) {
        k -= 2;
      } else if (ends("ies")) {
        set_to("i");
      } else if (b[static_cast<size_t>(k) - 1] != 's') {
        k--;
      }
    }
    if (ends("eed")) {
      if (measure() > 0) k--;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k = end;
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_consonant(k)) {
        char c = b[static_cast<size_t>(k)];
        if (c != 'l' && c != 's' && c != 'z') k--;
      } else if (measure() == 1 && cvc(k)) {
        end = k;
        set_to("e");
      }
    }
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b[static_cast<size_t>(k)] = 'i';
  }

  void step2() {
    switch (b[static_cast<size_t>(k) - 1]) {
      case 'a':
        if (ends("ational")) { replace_if_measure("ate"); break; }
        if (ends("tional")) { replace_if_measure("tion"); break; }
        break;
      case 'c':
        if (ends("enci")) { replace_if_measure("ence"); break; }
        if (ends("anci")) { replace_if_measure("ance"); break; }
        break;
      case 'e':
        if (ends("izer")) { replace_if_measure("ize"); break; }
        break;
      case 'l':
        if (ends("bli")) { replace_if_measure("ble"); break; }
        if (ends("alli")) { replace_if_measure("al"); break; }
        if (ends("entli")) { replace_if_measure("ent"); break; }
        if (ends("eli")) { replace_if_measure("e"); break; }
        if (ends("ousli")) { replace_if_measure("ous"); break; }
        break;
      case 'o':
        if (ends("ization")) { replace_if_measure("ize"); break; }
        if (ends("ation")) { replace_if_measure("ate"); break; }
        if (ends("ator")) { replace_if_measure("ate"); break; }
        break;
      case 's':
        if (ends("alism")) { replace_if_measure("al"); break; }
        if (ends("iveness")) { replace_if_measure("ive"); break; }
        if (ends("fulness")) { replace_if_measure("ful"); break; }
        if (ends("ousness")) { replace_if_measure("ous"); break; }
        break;
      case 't':
        if (ends("aliti")) { replace_if_measure("al"); break; }
        if (ends("iviti")) { replace_if_measure("ive"); break; }
        if (ends("biliti")) { replace_if_measure("ble"); break; }
        break;
      case 'g':
        if (ends("logi")) { replace_if_measure("log"); break; }
        break;
      default:
        break;
    }
  }

  void step3() {
    switch (b[static_cast<size_t>(k)]) {
      case 'e':
        if (ends("icate")) { replace_if_measure("ic"); break; }
        if (ends("ative")) { replace_if_measure(""); break; }
        if (ends("alize")) { replace_if_measure("al"); break; }
        break;
      case 'i':
        if (ends("iciti")) { replace_if_measure("ic"); break; }
        break;
      case 'l':
        if (ends("ical")) { replace_if_measure("ic"); break; }
        if (ends("ful")) { replace_if_measure(""); break; }
        break;
      case 's':
        if (ends("ness")) { replace_if_measure(""); break; }
        break;
      default:
        break;
    }
  }

  void step4() {
    switch (b[static_cast<size_t>(k) - 1]) {
      case 'a':
        if (ends("al")) break;
        return;
      case 'c':
        if (ends("ance")) break;
        if (ends("ence")) break;
        return;
      case 'e':
        if (ends("er")) break;
        return;
      case 'i':
        if (ends("ic")) break;
        return;
      case 'l':
        if (ends("able")) break;
        if (ends("ible")) break;
        return;
      case 'n':
        if (ends("ant")) break;
        if (ends("ement")) break;
        if (ends("ment")) break;
        if (ends("ent")) break;
        return;
      case 'o':
        if (ends("ion") && end >= 0 &&
            (b[static_cast<size_t>(end)] == 's' || b[static_cast<size_t>(end)] == 't'))
          break;
        if (ends("ou")) break;
        return;
      case 's':
        if (ends("ism")) break;
        return;
      case 't':
        if (ends("ate")) break;
        if (ends("iti")) break;
        return;
      case 'u':
        if (ends("ous")) break;
        return;
      case 'v':
        if (ends("ive")) break;
        return;
      case 'z':
        if (ends("ize")) break;
        return;
      default:
        return;
    }
    if (measure() > 1) k = end;
  }

  void step5() {
    end = k;
    if (b[static_cast<size_t>(k)] == 'e') {
      int m = measure();
      if (m > 1 || (m == 1 && !cvc(k - 1))) k--;
    }
    if (b[static_cast<size_t>(k)] == 'l' && double_consonant(k) && measure() > 1) k--;
  }
};

}  // namespace

std::string porter_stem(const std::string& word) {
  if (word.size() <= 2) return word;
  Stemmer st;
  st.b = word;
  st.k = static_cast<int>(word.size()) - 1;
  st.step1ab();
  if (st.k > 0) {
    st.step1c();
    st.step2();
    st.step3();
    st.step4();
    st.step5();
  }
  return st.b.substr(0, static_cast<size_t>(st.k) + 1);
}

std::vector<std::string> analyze(const std::string& s, bool stem) {
  std::vector<std::string> tokens = tokenize(s);
  if (stem)
    for (auto& t : tokens) t = porter_stem(t);
  return tokens;
}

}  // namespace adaqr::text

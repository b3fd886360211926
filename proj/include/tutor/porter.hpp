#pragma once

#include <string>
#include <string_view>

namespace tutor {

// Porter stemmer, following Martin Porter's reference C implementation
// (including its two documented departures: "bli" -> "ble" and
// "logi" -> "log", and leaving words of length <= 2 untouched).
// Input must be lowercase ASCII letters; anything else is returned as-is.
class PorterStemmer {
 public:
  std::string operator()(std::string_view word) const {
    for (char c : word) {
      if (c < 'a' || c > 'z') return std::string(word);
    }
    State s{std::string(word), static_cast<int>(word.size()) - 1, 0};
    if (s.k <= 1) return s.b;
    s.step1ab();
    if (s.k > 0) {
      s.step1c();
      s.step2();
      s.step3();
      s.step4();
      s.step5();
    }
    return s.b.substr(0, static_cast<std::size_t>(s.k + 1));
  }

 private:
  struct State {
    std::string b;
    int k;  // index of the last character of the current stem
    int j;  // general offset set by ends()

    bool cons(int i) const {
      switch (b[i]) {
        case 'a': case 'e': case 'i': case 'o': case 'u':
          return false;
        case 'y':
          return i == 0 ? true : !cons(i - 1);
        default:
          return true;
      }
    }

    // Number of VC sequences in b[0..j].
    int m() const {
      int n = 0;
      int i = 0;
      while (true) {
        if (i > j) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
      while (true) {
        while (true) {
          if (i > j) return n;
          if (cons(i)) break;
          ++i;
        }
        ++i;
        ++n;
        while (true) {
          if (i > j) return n;
          if (!cons(i)) break;
          ++i;
        }
        ++i;
      }
    }

    bool vowel_in_stem() const {
      for (int i = 0; i <= j; ++i) {
        if (!cons(i)) return true;
      }
      return false;
    }

    bool double_consonant(int i) const {
      if (i < 1) return false;
      if (b[i] != b[i - 1]) return false;
      return cons(i);
    }

    bool cvc(int i) const {
      if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
      char ch = b[i];
      return !(ch == 'w' || ch == 'x' || ch == 'y');
    }

    bool ends(std::string_view s) {
      int len = static_cast<int>(s.size());
      if (s.back() != b[k]) return false;
      if (len > k + 1) return false;
      if (std::string_view(b).substr(k - len + 1, len) != s) return false;
      j = k - len;
      return true;
    }

    void set_to(std::string_view s) {
      b.replace(j + 1, b.size() - (j + 1), s);
      k = j + static_cast<int>(s.size());
    }

    void r(std::string_view s) {
      if (m() > 0) set_to(s);
    }

    void step1ab() {
      if (b[k] == 's') {
        if (ends("sses")) {
          k -= 2;
        } else if (ends("ies")) {
          set_to("i");
        } else if (b[k - 1] != 's') {
          --k;
        }
      }
      if (ends("eed")) {
        if (m() > 0) --k;
      } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
        k = j;
        if (ends("at")) {
          set_to("ate");
        } else if (ends("bl")) {
          set_to("ble");
        } else if (ends("iz")) {
          set_to("ize");
        } else if (double_consonant(k)) {
          --k;
          char ch = b[k];
          if (ch == 'l' || ch == 's' || ch == 'z') ++k;
        } else {
          j = k;
          if (m() == 1 && cvc(k)) set_to("e");
        }
      }
    }

    void step1c() {
      if (ends("y") && vowel_in_stem()) b[k] = 'i';
    }

    bool rule(std::string_view suffix, std::string_view replacement) {
      if (!ends(suffix)) return false;
      r(replacement);
      return true;
    }

    void step2() {
      switch (b[k - 1]) {
        case 'a':
          rule("ational", "ate") || rule("tional", "tion");
          break;
        case 'c':
          rule("enci", "ence") || rule("anci", "ance");
          break;
        case 'e':
          rule("izer", "ize");
          break;
        case 'l':
          rule("bli", "ble") || rule("alli", "al") || rule("entli", "ent") ||
              rule("eli", "e") || rule("ousli", "ous");
          break;
        case 'o':
          rule("ization", "ize") || rule("ation", "ate") || rule("ator", "ate");
          break;
        case 's':
          rule("alism", "al") || rule("iveness", "ive") ||
              rule("fulness", "ful") || rule("ousness", "ous");
          break;
        case 't':
          rule("aliti", "al") || rule("iviti", "ive") || rule("biliti", "ble");
          break;
        case 'g':
          rule("logi", "log");
          break;
        default:
          break;
      }
    }

    void step3() {
      switch (b[k]) {
        case 'e':
          rule("icate", "ic") || rule("ative", "") || rule("alize", "al");
          break;
        case 'i':
          rule("iciti", "ic");
          break;
        case 'l':
          rule("ical", "ic") || rule("ful", "");
          break;
        case 's':
          rule("ness", "");
          break;
        default:
          break;
      }
    }

    void step4() {
      switch (b[k - 1]) {
        case 'a':
          if (ends("al")) break;
          return;
        case 'c':
          if (ends("ance") || ends("ence")) break;
          return;
        case 'e':
          if (ends("er")) break;
          return;
        case 'i':
          if (ends("ic")) break;
          return;
        case 'l':
          if (ends("able") || ends("ible")) break;
          return;
        case 'n':
          if (ends("ant") || ends("ement") || ends("ment") || ends("ent")) break;
          return;
        case 'o':
          if (ends("ion") && j >= 0 && (b[j] == 's' || b[j] == 't')) break;
          if (ends("ou")) break;
          return;
        case 's':
          if (ends("ism")) break;
          return;
        case 't':
          if (ends("ate") || ends("iti")) break;
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
      if (m() > 1) k = j;
    }

    void step5() {
      j = k;
      if (b[k] == 'e') {
        int a = m();
        if (a > 1 || (a == 1 && !cvc(k - 1))) --k;
      }
      if (b[k] == 'l' && double_consonant(k) && m() > 1) --k;
    }
  };
};

inline std::string porter_stem(std::string_view word) { return PorterStemmer{}(word); }

}  // namespace tutor

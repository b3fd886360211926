"""Independent token count for the tf fixture: regex split, stopword
filter, NLTK Porter stem, then count / total."""
import re
from pathlib import Path

from nltk.stem.porter import PorterStemmer

here = Path(__file__).resolve().parent
stop = set((here / "stopwords.txt").read_text().split())
text = (here.parent / "fixtures" / "revolution_source.txt").read_text().lower()
words = re.findall(r"[a-z0-9]+(?:['-][a-z0-9]+)*", text)
stemmer = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)
stems = [stemmer.stem(w) for w in words if w not in stop]
target = stemmer.stem("revolution")
print(target, stems.count(target), len(stems), repr(stems.count(target) / len(stems)))

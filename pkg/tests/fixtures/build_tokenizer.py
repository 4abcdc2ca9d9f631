"""Train the committed test tokenizer (tests/fixtures/tokenizer.json).

The fixture is a small whitespace-pretokenized BPE model trained on
prompt-like and SQL-like text. It exists so exact token counting can be
tested offline against an independent reimplementation of merge-rank BPE.
Rerunning this script reproduces the same file byte for byte.
"""

from __future__ import annotations

import string
from pathlib import Path

from tokenizers import Tokenizer
from tokenizers.models import BPE
from tokenizers.pre_tokenizers import Whitespace
from tokenizers.trainers import BpeTrainer

CORPUS = [
    "database: concert_singer question: How many singers do we have? SQL:",
    "database: battles question: What is the average tonnage of the ships? SQL:",
    "database: fleet question: List the name of every ship. SQL:",
    "select avg(tonnage) from ship",
    "select count(*) from singer",
    "select name, capacity from stadium order by capacity desc limit 1",
    "select t1.name from singer as t1 join concert as t2 on t1.id = t2.id",
    "select distinct country from singer where age > 20",
    "question | db_id | table : column, column | ship : name, tonnage",
    "database: db / schema: / table ship, columns = [ship.name (text),",
    "ship.tonnage (real | values: 3500, 1200)] / primary key: ship.id /",
    "foreign key: ship.lost_in_battle references battle.id / question:",
    "Which battles were decisive? How many entries are there in the table?",
    "What is the total capacity of all stadiums in each city?",
    "Show the name and result recorded in battle matching the filter.",
    "group by having count sum min max between like in not null is",
    "insert update delete union intersect except with recursive",
    "0 1 2 3 4 5 6 7 8 9 10 100 1000 2014 1805 1916 1942 1944",
]


def build(out_path: str) -> None:
    tokenizer = Tokenizer(BPE(unk_token="[UNK]"))
    tokenizer.pre_tokenizer = Whitespace()
    trainer = BpeTrainer(
        vocab_size=600,
        min_frequency=2,
        special_tokens=["[UNK]"],
        initial_alphabet=sorted(string.printable[:-6]),
        show_progress=False,
    )
    tokenizer.train_from_iterator(CORPUS, trainer)
    tokenizer.save(out_path)


if __name__ == "__main__":
    here = Path(__file__).resolve().parent
    build(str(here / "tokenizer.json"))
    print(f"wrote {here / 'tokenizer.json'}")

import json
import sys
from pathlib import Path

import pytest

from pandora.boxes import Box, BoxSet, FieldName, ForeignKey

TESTS_DIR = Path(__file__).parent

STUB_WORKER_CMD = [sys.executable, str(TESTS_DIR / "stub_worker.py")]


@pytest.fixture
def stub_cmd():
    return STUB_WORKER_CMD


def make_box(name, columns):
    """Build a box from {field: [values]} preserving insertion order."""
    fields = [FieldName(key) for key in columns]
    return Box.from_columns(FieldName(name), fields, {k: list(v) for k, v in columns.items()})


def make_boxset(boxes, fks=()):
    return BoxSet(
        boxes=boxes,
        foreign_keys=[ForeignKey(src=tuple(a), dst=tuple(b)) for a, b in fks],
    )


def write_script(path, entries):
    """Write a scripted-LLM JSONL file from (key, response) pairs."""
    with open(path, "w", encoding="utf-8") as fp:
        for key, response in entries:
            fp.write(json.dumps({"key": key, "response": response}) + "\n")
    return path


def fenced(program, reasoning="Filter the rows, then read off the answer."):
    return f"{reasoning}\n```python\n{program}\n```"


# --- desk benchmark -------------------------------------------------------
# 18 handcrafted questions (6 per task) whose scripted programs genuinely
# compute the gold answers from the fixture data on the stub worker, which
# binds each box as a plain {field: [values]} dict.

DESK_QUESTIONS = [
    # task, id, question, source kwargs, gold answers, program
    (
        "table", "t1", "What is the highest salary for an engineer in New York?",
        {"type": "table", "path": "jobs.csv"},
        [[135000]],
        "rows = zip(jobs['jobtitle'], jobs['location'], jobs['salary'])\n"
        "result = [[max(s for t, l, s in rows if t == 'Engineer' and l == 'New York')]]",
    ),
    (
        "table", "t2", "Which company pays the engineer in Boston?",
        {"type": "table", "path": "jobs.csv"},
        [["TechCorp"]],
        "rows = zip(jobs['jobtitle'], jobs['location'], jobs['company'])\n"
        "result = [[c] for t, l, c in rows if t == 'Engineer' and l == 'Boston']",
    ),
    (
        "table", "t3", "How many engineer positions are listed?",
        {"type": "table", "path": "jobs.csv"},
        [[3]],
        "result = [[sum(1 for t in jobs['jobtitle'] if t == 'Engineer')]]",
    ),
    (
        "table", "t4",
        "List all European countries by population in ascending order, excluding Germany.",
        {"type": "table", "path": "countries.csv"},
        [["Italy"], ["France"], ["UK"]],
        "rows = [(p, n) for n, c, p in zip(countries['countryname'],"
        " countries['continent'], countries['population'])"
        " if c == 'Europe' and n != 'Germany']\n"
        "result = [[n] for p, n in sorted(rows)]",
    ),
    (
        "table", "t5", "What is the total GDP of the European countries?",
        {"type": "table", "path": "countries.csv"},
        [[11275]],
        "result = [[sum(g for c, g in zip(countries['continent'], countries['gdp'])"
        " if c == 'Europe')]]",
    ),
    (
        "table", "t6", "Which continent is Canada in?",
        {"type": "table", "path": "countries.csv"},
        [["N. America"]],
        "result = [[c] for n, c in zip(countries['countryname'], countries['continent'])"
        " if n == 'Canada']",
    ),
    (
        "db", "d1",
        "Show the name and number of employees for the departments managed by heads "
        "whose temporary acting value is Yes.",
        {"type": "db", "path": "gov.json"},
        [["Treasury", 115], ["Homeland Security", 208]],
        "managed = {d for d, t in zip(management['department_id'],"
        " management['temporary_acting']) if t == 'Yes'}\n"
        "result = [[n, e] for d, n, e in zip(department['department_id'],"
        " department['name'], department['num_employees']) if d in managed]",
    ),
    (
        "db", "d2", "How many departments are there?",
        {"type": "db", "path": "gov.json"},
        [[3]],
        "result = [[len(department['department_id'])]]",
    ),
    (
        "db", "d3", "What is the name of the department with the most employees?",
        {"type": "db", "path": "gov.json"},
        [["Homeland Security"]],
        "result = [[max(zip(department['num_employees'], department['name']))[1]]]",
    ),
    (
        "db", "d4", "What are the songs in the album Night at Opera by Quean?",
        {"type": "db", "path": "music.json"},
        [["Pohemian Rhapsody"], ["My Best Friend"]],
        "quean = {i for i, n in zip(artists['artistid'], artists['artistname'])"
        " if n == 'Quean'}\n"
        "album_ids = {a for a, t, r in zip(albums['albumid'], albums['albumtitle'],"
        " albums['ref']) if r in quean and t == 'Night at Opera'}\n"
        "result = [[s] for s, r in zip(songs['songtitle'], songs['ref'])"
        " if r in album_ids]",
    ),
    (
        "db", "d5", "How many albums does Quean have?",
        {"type": "db", "path": "music.json"},
        [[2]],
        "quean = {i for i, n in zip(artists['artistid'], artists['artistname'])"
        " if n == 'Quean'}\n"
        "result = [[sum(1 for r in albums['ref'] if r in quean)]]",
    ),
    (
        "db", "d6", "Which album was released in 1971?",
        {"type": "db", "path": "music.json"},
        [["Led Zeppelin IV"]],
        "result = [[t] for t, y in zip(albums['albumtitle'], albums['release'])"
        " if y == 1971]",
    ),
    (
        "kg", "k1", "Who wrote hp1?",
        {
            "type": "kg", "path": "books.tsv", "topic_entities": ["hp1"],
            "candidate_relations": ["written_by", "publication_date"],
        },
        [["jkr"]],
        "result = [[w] for b, w in zip(book['book'], book['written_by']) if b == 'hp1']",
    ),
    (
        "kg", "k2", "Which books were written by jkr?",
        {
            "type": "kg", "path": "books.tsv", "topic_entities": ["jkr"],
            "candidate_relations": ["written_by", "publication_date"],
        },
        [["hp1"], ["hp2"]],
        "result = [[b] for b, w in zip(book['book'], book['written_by']) if w == 'jkr']",
    ),
    (
        "kg", "k3", "Which books written by jkr were published after 2005?",
        {
            "type": "kg", "path": "books.tsv", "topic_entities": ["jkr"],
            "candidate_relations": ["written_by", "publication_date"],
        },
        [["hp2"]],
        "rows = zip(book['book'], book['publication_date'], book['written_by'])\n"
        "result = [[b] for b, p, w in rows if w == 'jkr' and isinstance(p, int) and p > 2005]",
    ),
    (
        "kg", "k4", "What is the capital of France?",
        {
            "type": "kg", "path": "geo.tsv", "topic_entities": ["france"],
            "candidate_relations": ["capital_of", "population"],
        },
        [["paris"]],
        "result = [[c] for c, cap in zip(city['city'], city['capital_of'])"
        " if cap == 'france']",
    ),
    (
        "kg", "k5", "What is the population of Germany?",
        {
            "type": "kg", "path": "geo.tsv", "topic_entities": ["germany"],
            "candidate_relations": ["population"],
        },
        [[83783942]],
        "result = [[p] for c, p in zip(country['country'], country['population'])"
        " if c == 'germany']",
    ),
    (
        "kg", "k6", "Which city is the capital of Germany?",
        {
            "type": "kg", "path": "geo.tsv", "topic_entities": ["germany"],
            "candidate_relations": ["capital_of"],
        },
        [["berlin"]],
        "result = [[c] for c, cap in zip(city['city'], city['capital_of'])"
        " if cap == 'germany']",
    ),
]

# The same questions in the interpreter worker's pandas dialect, for runs
# against the real sidecar.
DESK_PANDAS_PROGRAMS = {
    "t1": "result = jobs[(jobs['jobtitle'] == 'Engineer') & (jobs['location'] == 'New York')]['salary'].max()",
    "t2": "result = jobs[(jobs['jobtitle'] == 'Engineer') & (jobs['location'] == 'Boston')][['company']]",
    "t3": "result = [[int((jobs['jobtitle'] == 'Engineer').sum())]]",
    "t4": "f = countries[(countries['continent'] == 'Europe') & (countries['countryname'] != 'Germany')]\n"
          "result = f.sort_values('population')[['countryname']]",
    "t5": "result = [[int(countries[countries['continent'] == 'Europe']['gdp'].sum())]]",
    "t6": "result = countries[countries['countryname'] == 'Canada'][['continent']]",
    "d1": "m = pd.merge(department, management, on='department_id')\n"
          "result = m[m['temporary_acting'] == 'Yes'][['name', 'num_employees']]",
    "d2": "result = [[len(department)]]",
    "d3": "result = department.sort_values('num_employees', ascending=False)[['name']].head(1)",
    "d4": "a = pd.merge(albums, artists, left_on='ref', right_on='artistid')\n"
          "a = a[(a['artistname'] == 'Quean') & (a['albumtitle'] == 'Night at Opera')]\n"
          "result = songs[songs['ref'].isin(a['albumid'])][['songtitle']]",
    "d5": "quean = artists[artists['artistname'] == 'Quean']['artistid']\n"
          "result = [[int(albums['ref'].isin(quean).sum())]]",
    "d6": "result = albums[albums['release'] == 1971][['albumtitle']]",
    "k1": "result = book[book['book'] == 'hp1'][['written_by']]",
    "k2": "result = book[book['written_by'] == 'jkr'][['book']]",
    "k3": "result = book[(book['written_by'] == 'jkr') & (book['publication_date'] > 2005)][['book']]",
    "k4": "result = city[city['capital_of'] == 'france'][['city']]",
    "k5": "result = country[country['country'] == 'germany'][['population']]",
    "k6": "result = city[city['capital_of'] == 'germany'][['city']]",
}

OTHER_TASK = {"table": "db", "db": "kg", "kg": "table"}

GENERIC_QUESTIONS = {
    "table": "generic spreadsheet lookup exercise number {i}",
    "db": "generic relational join exercise number {i}",
    "kg": "generic graph traversal exercise number {i}",
}


def build_desk_benchmark(root):
    """Write the full desk benchmark into `root`; returns the path map."""
    import fixtures
    from pandora.llm import FallbackEmbedder
    from pandora.memory import MemoryEntry, MemoryStore

    fixtures.write_text(root / "jobs.csv", fixtures.JOBS_CSV)
    fixtures.write_text(root / "countries.csv", fixtures.COUNTRIES_CSV)
    fixtures.write_json(root / "gov.json", fixtures.GOV_DB)
    fixtures.write_json(root / "music.json", fixtures.MUSIC_DB)
    fixtures.write_text(root / "books.tsv", fixtures.BOOKS_KG)
    fixtures.write_text(root / "geo.tsv", fixtures.GEO_KG)

    dataset_path = root / "desk.jsonl"
    with open(dataset_path, "w", encoding="utf-8") as fp:
        for task, qid, question, source, gold, _ in DESK_QUESTIONS:
            fp.write(
                json.dumps(
                    {
                        "id": qid,
                        "task": task,
                        "question": question,
                        "source": source,
                        "gold_answers": gold,
                    }
                )
                + "\n"
            )

    script_path = write_script(
        root / "script.jsonl",
        [(qid, fenced(program)) for _, qid, _, _, _, program in DESK_QUESTIONS],
    )
    pandas_script_path = write_script(
        root / "script_pandas.jsonl",
        [(qid, fenced(DESK_PANDAS_PROGRAMS[qid])) for _, qid, _, _, _, _ in DESK_QUESTIONS],
    )

    # Memory deliberately dominated by cross-task near-duplicates: for each
    # question the closest entry carries a different task tag, plus one
    # generic same-task entry so --same-task retrieval stays non-empty.
    embedder = FallbackEmbedder()
    store = MemoryStore(embedder)
    for i, (task, qid, question, _, _, program) in enumerate(DESK_QUESTIONS):
        store.append(
            MemoryEntry(
                id=f"mx_{qid}",
                task=OTHER_TASK[task],
                question=question + " (solved earlier)",
                schema_text="Box demo(a, b)",
                reasoning="Filter on the stated condition, then project the answer.",
                program=program,
                embedding=embedder.embed(question + " (solved earlier)"),
            )
        )
        generic = GENERIC_QUESTIONS[task].format(i=i)
        store.append(
            MemoryEntry(
                id=f"ms_{qid}",
                task=task,
                question=generic,
                schema_text="Box demo(a, b)",
                reasoning="Scan the rows and count the matches.",
                program="result = [[1]]",
                embedding=embedder.embed(generic),
            )
        )
    memory_path = root / "memory.jsonl"
    store.save(memory_path)

    return {
        "root": root,
        "dataset": dataset_path,
        "script": script_path,
        "pandas_script": pandas_script_path,
        "memory": memory_path,
    }


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    return build_desk_benchmark(tmp_path_factory.mktemp("desk"))

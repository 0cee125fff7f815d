"""Hand-built source fixtures shared by unit, acceptance, and benchmark tests."""

import json

JOB_POSTINGS = {
    "name": "Job_Postings",
    "columns": ["JobTitle", "Company", "Location", "Salary"],
    "rows": [
        ["Engineer", "TechCorp", "New York", "120000"],
        ["Manager", "BizInc", "San Fran", "130000"],
        ["Engineer", "InnovateLLC", "New York", "135000"],
        ["Analyst", "AlphaCo", "Chicago", "90000"],
        ["Engineer", "TechCorp", "Boston", "115000"],
    ],
}

COUNTRY_INFO = {
    "name": "Country_Info",
    "columns": ["CountryName", "Continent", "Population", "GDP"],
    "rows": [
        ["France", "Europe", "65273511", "2716"],
        ["Germany", "Europe", "83783942", "3846"],
        ["UK", "Europe", "67886011", "2827"],
        ["Italy", "Europe", "59554023", "1886"],
        ["Canada", "N. America", "37742154", "1736"],
    ],
}

GOV_DB = {
    "tables": [
        {
            "name": "department",
            "columns": ["Department_ID", "Name", "Num_Employees"],
            "rows": [
                ["1", "Treasury", "115"],
                ["2", "Homeland Security", "208"],
                ["3", "Education", "44"],
            ],
        },
        {
            "name": "management",
            "columns": ["Department_ID", "Head_ID", "Temporary_Acting"],
            "rows": [
                ["1", "5", "Yes"],
                ["2", "6", "Yes"],
                ["3", "7", "No"],
            ],
        },
    ],
    "foreign_keys": [
        {"from": ["management", "Department_ID"], "to": ["department", "Department_ID"]}
    ],
}

MUSIC_DB = {
    "tables": [
        {
            "name": "Artists",
            "columns": ["ArtistID", "ArtistName"],
            "rows": [["1", "Quean"], ["2", "Lead Zipelin"]],
        },
        {
            "name": "Albums",
            "columns": ["AlbumID", "AlbumTitle", "Ref", "Release"],
            "rows": [
                ["101", "Night at Opera", "1", "1975"],
                ["102", "Heart Attack", "1", "1974"],
                ["201", "Led Zeppelin IV", "2", "1971"],
            ],
        },
        {
            "name": "Songs",
            "columns": ["ID", "SongTitle", "Ref", "Duration"],
            "rows": [
                ["1001", "Pohemian Rhapsody", "101", "05:50"],
                ["1002", "My Best Friend", "101", "02:50"],
                ["1003", "Killa Queen", "102", "03:00"],
            ],
        },
    ],
    "foreign_keys": [
        {"from": ["Albums", "Ref"], "to": ["Artists", "ArtistID"]},
        {"from": ["Songs", "Ref"], "to": ["Albums", "AlbumID"]},
    ],
}

BOOKS_KG = """\
# book catalogue toy graph
jkr\tIsA\tauthor
stephen_king\tIsA\tauthor
hp1\tIsA\tbook
hp2\tIsA\tbook
it\tIsA\tbook
hp1\twritten_by\tjkr
hp2\twritten_by\tjkr
it\twritten_by\tstephen_king
hp1\tpublication_date\t1997
hp2\tpublication_date\t2007
it\tpublication_date\t1986
"""

GEO_KG = """\
france\tIsA\tcountry
germany\tIsA\tcountry
berlin\tIsA\tcity
paris\tIsA\tcity
berlin\tcapital_of\tgermany
paris\tcapital_of\tfrance
france\tpopulation\t65273511
germany\tpopulation\t83783942
"""

JOBS_CSV = """\
JobTitle,Company,Location,Salary
Engineer,TechCorp,New York,120000
Manager,BizInc,San Fran,130000
Engineer,InnovateLLC,New York,135000
Analyst,AlphaCo,Chicago,90000
Engineer,TechCorp,Boston,115000
"""

COUNTRIES_CSV = """\
CountryName,Continent,Population,GDP
France,Europe,65273511,2716
Germany,Europe,83783942,3846
UK,Europe,67886011,2827
Italy,Europe,59554023,1886
Canada,N. America,37742154,1736
"""


def write_json(path, obj):
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=1), encoding="utf-8")
    return path


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path

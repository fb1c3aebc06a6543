#!/usr/bin/env python3
"""Generates the synthetic fixture corpora under fixtures/corpora/.

The sentences come from small hand-written grammars with full inflection
tables, so every lemma is correct by construction. Output is deterministic
for a given seed; the committed files are the pinned snapshots.

    python3 fixtures/tools/gen_corpora.py
"""

import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "corpora"

# --------------------------------------------------------------------------
# Spanish (CoNLL-U, with del/al multiword tokens)

ES_NOUNS = [
    # lemma, gender, plural
    ("niño", "m", "niños"), ("casa", "f", "casas"), ("ciudad", "f", "ciudades"),
    ("gobierno", "m", "gobiernos"), ("presidente", "m", "presidentes"),
    ("mujer", "f", "mujeres"), ("libro", "m", "libros"), ("canción", "f", "canciones"),
    ("jardín", "m", "jardines"), ("país", "m", "países"), ("festival", "m", "festivales"),
    ("premio", "m", "premios"), ("empresa", "f", "empresas"), ("año", "m", "años"),
    ("trabajador", "m", "trabajadores"), ("profesor", "m", "profesores"),
    ("planetario", "m", "planetarios"), ("derecho", "m", "derechos"),
    ("entrega", "f", "entregas"), ("realizador", "m", "realizadores"),
    ("actor", "m", "actores"), ("ley", "f", "leyes"), ("proyecto", "m", "proyectos"),
    ("universidad", "f", "universidades"), ("museo", "m", "museos"),
    ("calle", "f", "calles"), ("pueblo", "m", "pueblos"), ("región", "f", "regiones"),
    ("obra", "f", "obras"), ("equipo", "m", "equipos"),
]
ES_ADJ = [
    # lemma, m.sg, f.sg, m.pl, f.pl
    ("nuevo", "nuevo", "nueva", "nuevos", "nuevas"),
    ("rojo", "rojo", "roja", "rojos", "rojas"),
    ("pequeño", "pequeño", "pequeña", "pequeños", "pequeñas"),
    ("viejo", "viejo", "vieja", "viejos", "viejas"),
    ("botánico", "botánico", "botánica", "botánicos", "botánicas"),
    ("japonés", "japonés", "japonesa", "japoneses", "japonesas"),
    ("grande", "grande", "grande", "grandes", "grandes"),
    ("importante", "importante", "importante", "importantes", "importantes"),
    ("textil", "textil", "textil", "textiles", "textiles"),
    ("público", "público", "pública", "públicos", "públicas"),
    ("antiguo", "antiguo", "antigua", "antiguos", "antiguas"),
    ("moderno", "moderno", "moderna", "modernos", "modernas"),
    ("famoso", "famoso", "famosa", "famosos", "famosas"),
    ("principal", "principal", "principal", "principales", "principales"),
]
ES_VERBS = [
    # lemma, pres.3sg, pres.3pl, pret.3sg, pret.3pl, impf.3sg, impf.3pl
    ("ofrecer", "ofrece", "ofrecen", "ofreció", "ofrecieron", "ofrecía", "ofrecían"),
    ("comprar", "compra", "compran", "compró", "compraron", "compraba", "compraban"),
    ("ocupar", "ocupa", "ocupan", "ocupó", "ocuparon", "ocupaba", "ocupaban"),
    ("cerrar", "cierra", "cierran", "cerró", "cerraron", "cerraba", "cerraban"),
    ("ver", "ve", "ven", "vio", "vieron", "veía", "veían"),
    ("tener", "tiene", "tienen", "tuvo", "tuvieron", "tenía", "tenían"),
    ("hacer", "hace", "hacen", "hizo", "hicieron", "hacía", "hacían"),
    ("construir", "construye", "construyen", "construyó", "construyeron", "construía", "construían"),
    ("abrir", "abre", "abren", "abrió", "abrieron", "abría", "abrían"),
    ("presentar", "presenta", "presentan", "presentó", "presentaron", "presentaba", "presentaban"),
    ("ganar", "gana", "ganan", "ganó", "ganaron", "ganaba", "ganaban"),
    ("visitar", "visita", "visitan", "visitó", "visitaron", "visitaba", "visitaban"),
    ("recibir", "recibe", "reciben", "recibió", "recibieron", "recibía", "recibían"),
    ("vender", "vende", "venden", "vendió", "vendieron", "vendía", "vendían"),
    ("describir", "describe", "describen", "describió", "describieron", "describía", "describían"),
    ("perder", "pierde", "pierden", "perdió", "perdieron", "perdía", "perdían"),
]
ES_PROPER = ["Madrid", "María", "Juan", "Venecia", "Sokurov", "Barcelona", "Ana", "Pedro", "Europa", "Lucía"]
ES_PREP = ["de", "en", "con", "para", "sobre", "desde", "a"]
ES_ADV = ["hoy", "ayer", "también", "mañana", "siempre", "ya"]
ES_DET = {
    # lemma -> (m.sg, f.sg, m.pl, f.pl)
    "el": ("el", "la", "los", "las"),
    "uno": ("un", "una", "unos", "unas"),
    "este": ("este", "esta", "estos", "estas"),
}


def es_np(rng):
    lemma, gender, plural = rng.choice(ES_NOUNS)
    pl = rng.random() < 0.4
    slot = (2 if pl else 0) + (1 if gender == "f" else 0)
    det_lemma = rng.choices(["el", "uno", "este"], [6, 2, 1])[0]
    words = [[ES_DET[det_lemma][slot], det_lemma], [plural if pl else lemma, lemma]]
    if rng.random() < 0.45:
        adj = rng.choice(ES_ADJ)
        words.append([adj[1 + slot], adj[0]])
    return words, pl


def es_sentence(rng):
    """Returns a list of tokens; a token is [form, lemma] or ("MWT", form, [tokens])."""
    toks = []
    if rng.random() < 0.25:
        toks.append([rng.choice(ES_ADV), None])
        toks[-1][1] = toks[-1][0]
        toks.append([",", ","])
    if rng.random() < 0.3:
        name = rng.choice(ES_PROPER)
        toks.append([name, name])
        subj_pl = False
    else:
        words, subj_pl = es_np(rng)
        toks.extend(words)
    verb = rng.choice(ES_VERBS)
    tense = rng.randrange(3)
    toks.append([verb[1 + 2 * tense + (1 if subj_pl else 0)], verb[0]])
    obj, _ = es_np(rng)
    toks.extend(obj)
    if rng.random() < 0.6:
        prep = rng.choice(ES_PREP)
        np, _ = es_np(rng)
        if prep in ("de", "a") and np[0][0] == "el":
            toks.append(("MWT", prep + "l", [[prep, prep], np[0]]))
            toks.extend(np[1:])
        else:
            toks.append([prep, prep])
            toks.extend(np)
    if rng.random() < 0.2:
        toks.append(["y", "y"])
        np, _ = es_np(rng)
        toks.extend(np)
    toks.append([".", "."])
    first = toks[0]
    if isinstance(first, list):
        first[0] = first[0][0].upper() + first[0][1:]
    return toks


def write_conllu(path, sentences, prefix):
    lines = []
    for n, toks in enumerate(sentences, 1):
        lines.append(f"# sent_id = {prefix}-{n}")
        words = []
        for t in toks:
            words.extend(t[2] if isinstance(t, tuple) else [t])
        lines.append("# text = " + " ".join(w[0] for w in words))
        idx = 1
        for t in toks:
            if isinstance(t, tuple):
                _, form, parts = t
                lines.append(f"{idx}-{idx + len(parts) - 1}\t{form}\t_\t_\t_\t_\t_\t_\t_\t_")
                for p in parts:
                    lines.append(f"{idx}\t{p[0]}\t{p[1]}\t_\t_\t_\t_\t_\t_\t_")
                    idx += 1
            else:
                lines.append(f"{idx}\t{t[0]}\t{t[1]}\t_\t_\t_\t_\t_\t_\t_")
                idx += 1
        lines.append("")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# English (CoNLL-U)

EN_NOUNS = [
    ("dog", "dogs"), ("child", "children"), ("man", "men"), ("woman", "women"),
    ("city", "cities"), ("book", "books"), ("park", "parks"), ("garden", "gardens"),
    ("festival", "festivals"), ("prize", "prizes"), ("company", "companies"),
    ("worker", "workers"), ("teacher", "teachers"), ("country", "countries"),
    ("law", "laws"), ("museum", "museums"), ("song", "songs"), ("team", "teams"),
    ("mouse", "mice"), ("house", "houses"), ("box", "boxes"), ("leaf", "leaves"),
]
EN_ADJ = [
    ("new", "newer"), ("big", "bigger"), ("small", "smaller"), ("old", "older"),
    ("good", "better"), ("happy", "happier"), ("large", "larger"), ("famous", None),
    ("public", None), ("modern", None),
]
EN_VERBS = [
    # lemma, 3sg, past, participle, gerund
    ("run", "runs", "ran", "run", "running"), ("go", "goes", "went", "gone", "going"),
    ("see", "sees", "saw", "seen", "seeing"), ("take", "takes", "took", "taken", "taking"),
    ("make", "makes", "made", "made", "making"), ("buy", "buys", "bought", "bought", "buying"),
    ("open", "opens", "opened", "opened", "opening"), ("close", "closes", "closed", "closed", "closing"),
    ("win", "wins", "won", "won", "winning"), ("build", "builds", "built", "built", "building"),
    ("visit", "visits", "visited", "visited", "visiting"), ("sell", "sells", "sold", "sold", "selling"),
    ("describe", "describes", "described", "described", "describing"),
    ("lose", "loses", "lost", "lost", "losing"), ("give", "gives", "gave", "given", "giving"),
    ("have", "has", "had", "had", "having"),
]
EN_PROPER = ["London", "Mary", "John", "Venice", "Europe", "Google", "Alexander", "Michael"]
EN_PREP = ["in", "on", "with", "for", "from", "to", "at", "of"]
EN_SUBJ_PRON = [("He", "he", False), ("She", "she", False), ("They", "they", True), ("It", "it", False)]
EN_OBJ_PRON = [("him", "he"), ("her", "she"), ("them", "they"), ("it", "it"), ("us", "we"), ("me", "I")]


def en_np(rng, allow_pron=False):
    if allow_pron and rng.random() < 0.15:
        form, lemma = rng.choice(EN_OBJ_PRON)
        return [[form, lemma]], False
    lemma, plural = rng.choice(EN_NOUNS)
    pl = rng.random() < 0.4
    if pl:
        det = rng.choice([("the", "the"), ("these", "this"), ("those", "that"), None])
    else:
        det = rng.choice([("the", "the"), ("a", "a"), ("this", "this"), ("that", "that")])
    words = [list(det)] if det else []
    if rng.random() < 0.4:
        adj = rng.choice(EN_ADJ)
        if adj[1] and rng.random() < 0.3:
            words.append([adj[1], adj[0]])
        else:
            words.append([adj[0], adj[0]])
    if det and det[0] == "a" and words[-1][0][0] in "aeiou":
        words[0] = ["an", "a"]
    words.append([plural if pl else lemma, lemma])
    return words, pl


def en_sentence(rng):
    toks = []
    r = rng.random()
    if r < 0.2:
        form, lemma, pl = rng.choice(EN_SUBJ_PRON)
        toks.append([form, lemma])
    elif r < 0.4:
        name = rng.choice(EN_PROPER)
        toks.append([name, name])
        pl = False
    else:
        words, pl = en_np(rng)
        toks.extend(words)
    verb = rng.choice(EN_VERBS)
    aspect = rng.randrange(4)
    if aspect == 0:
        toks.append([verb[0] if pl else verb[1], verb[0]])
    elif aspect == 1:
        toks.append([verb[2], verb[0]])
    elif aspect == 2:
        toks.append(["have" if pl else "has", "have"])
        toks.append([verb[3], verb[0]])
    else:
        aux = rng.choice([("are", "is"), ("were", "was")])
        toks.append([aux[0] if pl else aux[1], "be"])
        toks.append([verb[4], verb[0]])
    obj, _ = en_np(rng, allow_pron=True)
    toks.extend(obj)
    if rng.random() < 0.5:
        toks.append([rng.choice(EN_PREP)] * 2)
        if rng.random() < 0.3:
            name = rng.choice(EN_PROPER)
            toks.append([name, name])
        else:
            np, _ = en_np(rng)
            toks.extend(np)
    toks.append([".", "."])
    f = toks[0]
    f[0] = f[0][0].upper() + f[0][1:]
    return toks


# --------------------------------------------------------------------------
# Basque (two-column TSV)

EU_AGENTS = [
    # lemma, abs.sg, abs.pl, erg.sg, erg.pl
    ("gizon", "gizona", "gizonak", "gizonak", "gizonek"),
    ("emakume", "emakumea", "emakumeak", "emakumeak", "emakumeek"),
    ("ikasle", "ikaslea", "ikasleak", "ikasleak", "ikasleek"),
    ("irakasle", "irakaslea", "irakasleak", "irakasleak", "irakasleek"),
    ("haur", "haurra", "haurrak", "haurrak", "haurrek"),
    ("lagun", "laguna", "lagunak", "lagunak", "lagunek"),
]
EU_OBJECTS = [
    # lemma, abs.sg, abs.pl
    ("liburu", "liburua", "liburuak"), ("sagar", "sagarra", "sagarrak"),
    ("ogi", "ogia", "ogiak"), ("kotxe", "kotxea", "kotxeak"),
    ("gutun", "gutuna", "gutunak"), ("etxe", "etxea", "etxeak"),
    ("egunkari", "egunkaria", "egunkariak"),
]
EU_PLACES = [
    # lemma, inessive, allative, ablative
    ("etxe", "etxean", "etxera", "etxetik"), ("mendi", "mendian", "mendira", "menditik"),
    ("herri", "herrian", "herrira", "herritik"), ("eskola", "eskolan", "eskolara", "eskolatik"),
    ("hiri", "hirian", "hirira", "hiritik"), ("itsaso", "itsasoan", "itsasora", "itsasotik"),
    ("lur", "lurrean", "lurrera", "lurretik"), ("ibai", "ibaian", "ibaira", "ibaitik"),
    ("liburutegi", "liburutegian", "liburutegira", "liburutegitik"),
]
EU_TRANS = [
    # lemma (= perfective participle), future, imperfective
    ("ikusi", "ikusiko", "ikusten"), ("erosi", "erosiko", "erosten"),
    ("egin", "egingo", "egiten"), ("idatzi", "idatziko", "idazten"),
    ("irakurri", "irakurriko", "irakurtzen"), ("jan", "jango", "jaten"),
    ("saldu", "salduko", "saltzen"), ("ekarri", "ekarriko", "ekartzen"),
]
EU_MOTION = [("joan", "joango", "joaten"), ("etorri", "etorriko", "etortzen")]
EU_AUX_TR = {False: ["du", "zuen"], True: ["dute", "zuten"]}
EU_AUX_INTR = {False: ["da", "zen"], True: ["dira", "ziren"]}


def eu_sentence(rng):
    toks = []
    agent = rng.choice(EU_AGENTS)
    pl = rng.random() < 0.35
    if rng.random() < 0.6:
        toks.append([agent[4] if pl else agent[3], agent[0]])
        if rng.random() < 0.4:
            place = rng.choice(EU_PLACES)
            toks.append([place[1], place[0]])
        obj = rng.choice(EU_OBJECTS)
        opl = rng.random() < 0.3
        toks.append([obj[2] if opl else obj[1], obj[0]])
        verb = rng.choice(EU_TRANS)
        form = rng.choice(verb)
        toks.append([form, verb[0]])
        toks.append([rng.choice(EU_AUX_TR[pl]), "edun"])
    else:
        toks.append([agent[2] if pl else agent[1], agent[0]])
        place = rng.choice(EU_PLACES)
        case = rng.choice([2, 3])
        toks.append([place[case], place[0]])
        verb = rng.choice(EU_MOTION)
        toks.append([rng.choice(verb), verb[0]])
        toks.append([rng.choice(EU_AUX_INTR[pl]), "izan"])
    toks.append([".", "."])
    toks[0][0] = toks[0][0][0].upper() + toks[0][0][1:]
    return toks


def write_tsv(path, sentences):
    blocks = ["\n".join(f"{w}\t{l}" for w, l in toks) for toks in sentences]
    path.write_text("\n\n".join(blocks) + "\n", encoding="utf-8")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20250101)
    write_conllu(OUT / "es_synth.conllu", [es_sentence(rng) for _ in range(220)], "es_synth")
    rng = random.Random(20250102)
    write_conllu(OUT / "en_synth.conllu", [en_sentence(rng) for _ in range(150)], "en_synth")
    rng = random.Random(20250103)
    write_tsv(OUT / "eu_synth.tsv", [eu_sentence(rng) for _ in range(120)])


if __name__ == "__main__":
    main()

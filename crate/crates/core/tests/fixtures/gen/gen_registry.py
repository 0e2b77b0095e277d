"""Mini ontology registries: about 200 types each for dbpedia and schemaorg."""

import json
import re
from pathlib import Path

DBPEDIA = """
name title description type status code label
birthDate deathDate birthPlace deathPlace birthName
country city state region district county province municipality continent location place
populationTotal populationDensity areaTotal areaLand areaWater elevation latitude longitude
postalCode areaCode timeZone capital currency language officialLanguage
leaderName leaderTitle mayor governor president chairman founder owner
foundingDate foundingYear dissolutionDate numberOfEmployees revenue netIncome industry product
parentCompany subsidiary headquarter homepage
genre author publisher isbn releaseDate runtime director producer starring budget gross
artist album recordLabel composer instrument musicalArtist
award category school university almaMater degree campus numberOfStudents dean
team position height weight league season coach stadium capacity club
nationality occupation spouse child relative party office successor predecessor
religion ethnicity gender age
species genus family order kingdom phylum conservationStatus
elementGroup atomicNumber atomicWeight meltingPoint boilingPoint density colour
length width depth volume mass topSpeed engine manufacturer model year
iataCode icaoCode airline destination route distance duration
architect floorCount openingDate closingDate buildingType
river mountain lake sea island mountainRange
electionDate votes percentage rank score goals points wins losses draws
championships draftYear draftPick debutYear retirementYear careerStation
formerName nickname motto anthem flag coatOfArms
governmentType legislature judiciary constitution
shipClass shipLaunch shipBeam tonnage
aircraftType wingspan crewSize maidenFlight
operator owningOrganisation service network frequency broadcastArea
episodeNumber seasonNumber network numberOfEpisodes firstAirDate lastAirDate
illustrator translator editor
painter museum movement technique
diocese bishop saint feastDay
grape wineRegion vintage
hostCity participant medalist firstWinner
""".split()

SCHEMAORG = """
name description url image identifier alternateName sameAs
givenName familyName additionalName honorificPrefix honorificSuffix
email telephone faxNumber address streetAddress addressLocality addressRegion
postalCode addressCountry postOfficeBoxNumber
birthDate birthPlace deathDate deathPlace homeLocation workLocation nationality gender
jobTitle worksFor affiliation alumniOf knowsLanguage person
price priceCurrency priceValidUntil sku gtin mpn brand model color material
weight height width depth size
availability itemCondition offers seller review reviewRating ratingValue
bestRating worstRating ratingCount reviewCount aggregateRating
author creator contributor publisher editor
dateCreated dateModified datePublished copyrightYear copyrightHolder license
headline articleBody wordCount keywords genre inLanguage
startDate endDate duration location organizer performer attendee
eventStatus eventAttendanceMode
latitude longitude elevation geo
openingHours telephoneNumber paymentAccepted currenciesAccepted priceRange
servesCuisine menu acceptsReservations
numberOfRooms floorSize petsAllowed
isbn bookEdition bookFormat numberOfPages illustrator
album byArtist inAlbum recordLabel numTracks
episodeNumber seasonNumber numberOfEpisodes numberOfSeasons
director actor producer productionCompany
contentRating
employee numberOfEmployees founder foundingDate foundingLocation
legalName taxID vatID duns naics isicV4
parentOrganization subOrganization department member memberOf
award funder sponsor
courseCode educationalLevel educationalCredentialAwarded
occupationalCategory salaryCurrency baseSalary employmentType
hiringOrganization jobLocation datePosted validThrough
dosageForm activeIngredient drugClass
medicalSpecialty
flightNumber departureAirport arrivalAirport departureTime arrivalTime
airline aircraft
vehicleIdentificationNumber mileageFromOdometer fuelType vehicleEngine
modelDate productionDate purchaseDate
accountablePerson
tickerSymbol
recipeIngredient recipeYield cookTime prepTime totalTime
nutrition calories
softwareVersion operatingSystem applicationCategory
fileSize encodingFormat contentSize uploadDate
distance
""".split()

# super-type chains, child -> parent
DBPEDIA_SUPER = {
    "city": "location", "country": "location", "state": "location", "region": "location",
    "district": "location", "county": "location", "province": "location",
    "municipality": "location", "continent": "location", "location": "place",
    "birthPlace": "place", "deathPlace": "place",
    "populationDensity": "populationTotal",
    "areaLand": "areaTotal", "areaWater": "areaTotal",
    "mayor": "leaderName", "governor": "leaderName",
    "almaMater": "school", "university": "school",
    "musicalArtist": "artist", "painter": "artist",
    "officialLanguage": "language",
    "wins": "points", "losses": "points", "draws": "points",
}
SCHEMAORG_SUPER = {
    "givenName": "name", "familyName": "name", "additionalName": "name", "alternateName": "name",
    "legalName": "name",
    "streetAddress": "address", "addressLocality": "address", "addressRegion": "address",
    "postalCode": "address", "addressCountry": "address", "postOfficeBoxNumber": "address",
    "telephoneNumber": "telephone",
    "homeLocation": "location", "workLocation": "location", "jobLocation": "location",
    "foundingLocation": "location",
    "ratingValue": "aggregateRating", "bestRating": "aggregateRating", "worstRating": "aggregateRating",
    "datePublished": "dateCreated", "dateModified": "dateCreated",
}

ATOMIC = {
    "Date": re.compile(r"(Date|Year|Time|datePosted|validThrough|startDate|endDate)$"),
    "Numeric": re.compile(r"^(number|population|area|elevation|latitude|longitude|height|weight|width|"
                          r"depth|length|volume|mass|price|rating|votes|percentage|rank|score|goals|points|"
                          r"wins|losses|draws|capacity|budget|gross|revenue|runtime|distance|duration|age|"
                          r"atomic|melting|boiling|density|tonnage|wingspan|crew|calories|fileSize|num|"
                          r"floor|word|copyright)"),
}


def split_words(ident: str) -> str:
    """camelCase identifier -> lowercase space-separated label."""
    return re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", ident).lower()


def atomic_of(ident: str) -> str:
    for kind, pat in ATOMIC.items():
        if pat.search(ident):
            return kind
    return "Text"


def build(ids, supers, ontology):
    seen = []
    for i in ids:
        if i not in seen:
            seen.append(i)
    records = []
    for ident in seen:
        rec = {"id": ident, "ontology": ontology, "label": split_words(ident), "atomic_type": atomic_of(ident)}
        if ident in supers:
            assert supers[ident] in seen, (ident, supers[ident])
            rec["super"] = supers[ident]
        records.append(rec)
    # labels must be distinct even as token multisets, so that every label
    # has a unique embedding under order-invariant phrase averaging
    bags = {}
    for r in records:
        bag = tuple(sorted(r["label"].split()))
        assert bag not in bags, (r["id"], bags.get(bag))
        bags[bag] = r["id"]
    return records


def write(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    regs = {
        "dbpedia": build(DBPEDIA, DBPEDIA_SUPER, "dbpedia"),
        "schemaorg": build(SCHEMAORG, SCHEMAORG_SUPER, "schemaorg"),
    }
    for name, recs in regs.items():
        with open(out_dir / f"{name}.jsonl", "w") as f:
            for r in recs:
                f.write(json.dumps(r, sort_keys=True) + "\n")
    return regs


if __name__ == "__main__":
    regs = write(Path(__file__).resolve().parent.parent / "registry")
    for k, v in regs.items():
        print(k, len(v))

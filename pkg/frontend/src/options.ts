// The relevance rubric shown to raters. Five graded options are presented in
// full; the server's statistics run on the three-way yes/not-sure/no scale,
// so the selection collapses before it is posted.

export type ThreeWay = "yes" | "not_sure" | "no";

export interface GuidelineOption {
  ordinal: number;
  label: string;
  mapsTo: ThreeWay;
}

export const RELEVANCE_OPTIONS: readonly GuidelineOption[] = [
  {
    ordinal: 1,
    label: "Yes. Unique to SEA.",
    mapsTo: "yes",
  },
  {
    ordinal: 2,
    label:
      "Yes, people will likely think of SEA when seeing the picture, but it " +
      "may have a low degree of similarity to other cultures.",
    mapsTo: "yes",
  },
  {
    ordinal: 3,
    label: "Maybe. Not originally from SEA but very common in SEA culture.",
    mapsTo: "not_sure",
  },
  {
    ordinal: 4,
    label:
      "Not really. It has some affiliation to SEA, but actually does not " +
      "represent SEA or has stronger affiliation to cultures outside SEA.",
    mapsTo: "no",
  },
  {
    ordinal: 5,
    label: "No. Totally unrelated to SEA.",
    mapsTo: "no",
  },
];

export function collapseOption(ordinal: number): ThreeWay {
  const option = RELEVANCE_OPTIONS.find((o) => o.ordinal === ordinal);
  if (!option) {
    throw new RangeError(`no relevance option ${ordinal}`);
  }
  return option.mapsTo;
}

package demo;

public class Describer {
    String describe(Object item) {
        String text = String.valueOf(item);
        return text.trim();
    }
}

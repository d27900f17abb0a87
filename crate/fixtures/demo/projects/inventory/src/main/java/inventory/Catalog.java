package inventory;

import java.util.HashMap;
import java.util.Map;

public class Catalog {
    private final Map<String, Integer> counts = new HashMap<>();

    public int count(String sku) {
        Integer n = counts.get(sku);
        if (n == null) {
            return 0;
        }
        return n.intValue();
    }

    public void add(String sku) {
        counts.put(sku, count(sku) + 1);
    }
}
